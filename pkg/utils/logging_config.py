# utils/logging_config.py
import logging
import logging.handlers
import sys
import time
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional


class ColoredFormatter(logging.Formatter):
    """Custom formatter with colors for console output"""

    # Color codes
    COLORS = {
        'DEBUG': '\033[36m',  # Cyan
        'INFO': '\033[32m',  # Green
        'WARNING': '\033[33m',  # Yellow
        'ERROR': '\033[31m',  # Red
        'CRITICAL': '\033[35m',  # Magenta
        'RESET': '\033[0m'  # Reset
    }

    def format(self, record):
        levelname = record.levelname
        if levelname in self.COLORS:
            record.levelname = f"{self.COLORS[levelname]}{levelname}{self.COLORS['RESET']}"
        try:
            return super().format(record)
        finally:
            record.levelname = levelname


def setup_logging(
        app_name: str = "pad_middleware",
        log_level: str = "INFO",
        log_dir: Optional[str] = None,
        backup_count: int = 30,
        enable_console: bool = True,
        enable_file: bool = True,
        enable_daily_rotation: bool = True,
        max_bytes: int = 10 * 1024 * 1024,
        console_stream=None,
):
    """
    Setup logging with console output and optional daily rolling files

    Args:
        app_name: Name of the application (used in log filenames)
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_dir: Directory to store log files; file logging is skipped when None
        backup_count: Number of rotated files to keep
        enable_console: Whether to enable console logging
        enable_file: Whether to enable file logging
        enable_daily_rotation: Whether to use daily rotation vs size-based
        max_bytes: Maximum size per log file for size-based rotation
        console_stream: Stream for the console handler (stderr by default so
            stdout stays free for command output)
    """

    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    numeric_level = getattr(logging, log_level.upper(), logging.INFO)
    root_logger.setLevel(numeric_level)

    detailed_formatter = logging.Formatter(
        fmt='%(asctime)s | %(levelname)-8s | %(name)s | %(funcName)s:%(lineno)d | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    simple_formatter = logging.Formatter(
        fmt='%(asctime)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    colored_formatter = ColoredFormatter(
        fmt='%(asctime)s | %(levelname)-8s | %(name)s | %(message)s',
        datefmt='%H:%M:%S'
    )

    handlers = []
    log_path = None

    if enable_console:
        console_handler = logging.StreamHandler(console_stream or sys.stderr)
        console_handler.setLevel(numeric_level)
        console_handler.setFormatter(colored_formatter)
        handlers.append(console_handler)

    audit_logger = logging.getLogger("audit")
    for handler in audit_logger.handlers[:]:
        audit_logger.removeHandler(handler)

    if enable_file and log_dir:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)

        if enable_daily_rotation:
            file_handler = logging.handlers.TimedRotatingFileHandler(
                filename=log_path / f"{app_name}.log",
                when='midnight',
                interval=1,
                backupCount=backup_count,
                encoding='utf-8'
            )
            file_handler.suffix = "%Y-%m-%d"
        else:
            file_handler = logging.handlers.RotatingFileHandler(
                filename=log_path / f"{app_name}.log",
                maxBytes=max_bytes,
                backupCount=backup_count,
                encoding='utf-8'
            )
        file_handler.setLevel(numeric_level)
        file_handler.setFormatter(detailed_formatter)
        handlers.append(file_handler)

        # ERROR and CRITICAL only
        error_file_handler = logging.handlers.TimedRotatingFileHandler(
            filename=log_path / f"{app_name}-error.log",
            when='midnight',
            interval=1,
            backupCount=backup_count,
            encoding='utf-8'
        )
        error_file_handler.setLevel(logging.ERROR)
        error_file_handler.setFormatter(detailed_formatter)
        error_file_handler.suffix = "%Y-%m-%d"
        handlers.append(error_file_handler)

        # One line per policy decision
        audit_file_handler = logging.handlers.TimedRotatingFileHandler(
            filename=log_path / f"{app_name}-audit.log",
            when='midnight',
            interval=1,
            backupCount=backup_count,
            encoding='utf-8'
        )
        audit_file_handler.setLevel(logging.INFO)
        audit_file_handler.setFormatter(simple_formatter)
        audit_file_handler.suffix = "%Y-%m-%d"
        audit_logger.addHandler(audit_file_handler)

    audit_logger.setLevel(logging.INFO)
    audit_logger.propagate = log_path is None

    for handler in handlers:
        root_logger.addHandler(handler)

    configure_specific_loggers(numeric_level)

    logger = logging.getLogger(__name__)
    logger.debug(f"Logging configured - Level: {log_level}, Log directory: {log_path or 'console only'}")
    return log_path


def configure_specific_loggers(level):
    """Configure specific loggers with appropriate levels"""

    # Suppress noisy third-party loggers
    logging.getLogger("asyncio").setLevel(logging.WARNING)
    logging.getLogger("redis").setLevel(logging.WARNING)
    logging.getLogger("httpx").setLevel(logging.WARNING)
    logging.getLogger("uvicorn").setLevel(logging.WARNING)
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)

    for package in ("pad", "policy", "delegator", "middleware", "producer", "consumers", "scenario", "simulation"):
        logging.getLogger(package).setLevel(level)


def setup_cli_logging(log_level: str = "WARNING", log_dir: Optional[str] = None):
    """Logging for command line use: stderr console, files only when a directory is configured"""
    return setup_logging(
        app_name="pad_middleware",
        log_level=log_level,
        log_dir=log_dir,
        enable_console=True,
        enable_file=log_dir is not None,
        enable_daily_rotation=True,
    )


def setup_service_logging(log_dir: Optional[str], log_level: str = "INFO"):
    """Logging for the long running delegator service"""
    return setup_logging(
        app_name="pad_delegator",
        log_level=log_level,
        log_dir=log_dir,
        backup_count=60,
        enable_console=True,
        enable_file=log_dir is not None,
        enable_daily_rotation=True,
    )


def get_audit_logger():
    """Get the audit logger for policy decisions"""
    return logging.getLogger("audit")


def log_policy_decision(engine: str, phase: str, verdict: bool, details: str = None):
    """Log one policy decision in structured format"""
    details_info = f" | {details}" if details else ""
    outcome = "ALLOW" if verdict else "DENY"
    get_audit_logger().info(f"Engine: {engine} | Phase: {phase} | Verdict: {outcome}{details_info}")


def log_performance_metric(metric_name: str, value: float, unit: str = "ms", context: dict = None):
    """Log performance metrics"""
    logger = logging.getLogger("performance")
    context_info = f" | Context: {context}" if context else ""
    logger.info(f"Metric: {metric_name} | Value: {value:.3f}{unit}{context_info}")


class PhaseRecorder:
    """Collects phase durations (ms) recorded by LogExecutionTime"""

    def __init__(self):
        self._samples: Dict[str, List[float]] = defaultdict(list)

    def record(self, phase: str, duration_ms: float):
        self._samples[phase].append(duration_ms)

    def samples(self, phase: str) -> List[float]:
        return list(self._samples.get(phase, []))

    def count(self, phase: str) -> int:
        return len(self._samples.get(phase, []))

    def phases(self) -> List[str]:
        return list(self._samples)

    def mean(self, phase: str) -> Optional[float]:
        values = self._samples.get(phase)
        if not values:
            return None
        return sum(values) / len(values)


class LogExecutionTime:
    """Context manager to log execution time of code blocks"""

    def __init__(self, operation_name: str, logger_name: str = None, recorder: PhaseRecorder = None):
        self.operation_name = operation_name
        self.logger = logging.getLogger(logger_name or __name__)
        self.recorder = recorder
        self.start_time = None
        self.duration_ms = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        self.logger.debug(f"Starting: {self.operation_name}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.duration_ms = (time.perf_counter() - self.start_time) * 1000

        if exc_type:
            self.logger.debug(f"Failed: {self.operation_name} | Duration: {self.duration_ms:.3f}ms | Error: {exc_val}")
            return

        if self.recorder is not None:
            self.recorder.record(self.operation_name, self.duration_ms)
        self.logger.debug(f"Completed: {self.operation_name} | Duration: {self.duration_ms:.3f}ms")
