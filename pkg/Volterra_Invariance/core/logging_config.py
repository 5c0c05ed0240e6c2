from loguru import logger
import sys
import csv
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict

RUN_COLUMNS = ['Log_time', 'Command', 'Order', 'Mode', 'Seed', 'Samples', 'Status', 'Detail']


class RunLogProcessor:
    """Append run records to a daily runs.csv ledger"""
    def __init__(self, base_dir: str):
        self.base_dir = Path(base_dir)

    def _get_csv_file_for_record(self, record_time: datetime) -> Path:
        """Daily CSV file for the log record's timestamp."""
        daily_dir = self.base_dir / record_time.strftime('%Y-%m-%d')
        daily_dir.mkdir(parents=True, exist_ok=True)
        return daily_dir / "runs.csv"

    def _setup_csv(self, csv_file: Path):
        """Write the header if the file is new or empty."""
        if not csv_file.exists() or csv_file.stat().st_size == 0:
            with open(csv_file, 'w', newline='') as f:
                csv.writer(f).writerow(RUN_COLUMNS)

    def process_log(self, record: Dict[str, Any]) -> str:
        """Write one run record to the ledger."""
        message = record['message']
        try:
            csv_file = self._get_csv_file_for_record(record['time'])
            self._setup_csv(csv_file)

            try:
                data = json.loads(message)
            except json.JSONDecodeError:
                data = {'detail': message}
            if not isinstance(data, dict):
                data = {'detail': str(data)}

            row = [record['time'].strftime('%Y-%m-%d %H:%M:%S.%f')]
            row += [data.get(col.lower(), 'None') for col in RUN_COLUMNS[1:]]
            with open(csv_file, 'a', newline='') as f:
                csv.writer(f).writerow(row)
            return json.dumps(data)
        except Exception as e:
            return f"Error processing run log: {e} | Raw: {message}"


def setup_logging(
    log_level: str = "INFO",
    base_log_dir: str = "logs_folder",
    rotation: str = "00:00",
    retention: str = "30 days",
    enable_console: bool = True,
    enable_files: bool = True,
):
    """
    Configure logging for the entire application.
    Call this ONCE at start-up.

    Sinks:
    - console (stderr, so CSV written to stdout stays clean)
    - <base>/<YYYY-MM-DD>/all.log and errors.log, rotated at midnight
    - <base>/<YYYY-MM-DD>/runs.csv, fed by logger.bind(run=True)

    Args:
        log_level: Minimum log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        base_log_dir: Base directory for logs (daily folders are created here)
        rotation: When to rotate logs
        retention: How long to keep old logs
        enable_console: Whether to output to the console
        enable_files: Whether to write log files and the run ledger
    """
    logger.remove()

    if enable_console:
        logger.add(
            sys.stderr,
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}",
            level=log_level,
            filter=lambda record: record["extra"].get("console", True),
        )

    if not enable_files:
        return

    log_dir_format = Path(base_log_dir) / "{time:YYYY-MM-DD}"
    run_processor = RunLogProcessor(base_log_dir)

    def run_sink(message):
        try:
            run_processor.process_log(message.record)
        except Exception as e:
            print(f"Error in run sink: {e}", file=sys.stderr)

    # 1. everything
    logger.add(
        log_dir_format / "all.log",
        rotation=rotation,
        retention=retention,
        compression="zip",
        level=log_level,
        format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} | {message}",
        backtrace=True,
        diagnose=True,
    )

    # 2. errors only
    logger.add(
        log_dir_format / "errors.log",
        rotation=rotation,
        retention=retention,
        compression="zip",
        level="ERROR",
        format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} | {message}",
        backtrace=True,
        diagnose=True,
    )

    # 3. run ledger, triggered by logger.bind(run=True)
    logger.add(
        run_sink,
        level="INFO",
        filter=lambda record: "run" in record["extra"],
    )

    logger.info(f"Logging initialized | Level: {log_level} | Base Directory: {base_log_dir}")
