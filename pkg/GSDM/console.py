"""
GSDM.console - Shared console, logging and progress helpers

All GSDM modules log through named loggers (``gsdm.<module>``) rendered by a
single rich console. Long-running loops (training epochs, chain generation,
ablation sweeps) display a transient progress bar built by ``make_progress``.

Example usage:
```python
from GSDM.console import add_file_handler, make_progress

add_file_handler("runs/demo/run.log")
with make_progress() as progress:
    task = progress.add_task("[cyan]Working...", total=10)
    for _ in range(10):
        progress.advance(task)
```
"""

import logging
import os

from rich.console import Console
from rich.logging import RichHandler
from rich.progress import Progress, SpinnerColumn, BarColumn, TextColumn, TimeElapsedColumn

# Configure rich logging
console = Console()
logging.basicConfig(
    level=logging.INFO,
    format="%(message)s",
    datefmt="[%X]",
    handlers=[RichHandler(console=console, show_time=True, markup=True)],
)


def get_logger(name: str) -> logging.Logger:
    """Return the ``gsdm.<name>`` logger."""
    return logging.getLogger(f"gsdm.{name}")


def add_file_handler(path: str, level: int = logging.INFO) -> logging.FileHandler:
    """
    Mirror all GSDM log records into a plain-text file.

    Args:
        path (str): Log file path. Parent directories are created.
        level (int, optional): Minimum level written to the file. Default INFO.

    Returns:
        logging.FileHandler: The attached handler (detach it with ``remove_handler``).
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    file_handler = logging.FileHandler(path, encoding="utf-8")
    file_handler.setLevel(level)
    file_handler.setFormatter(logging.Formatter(
        fmt="%(asctime)s - %(levelname)s - %(message)s",
        datefmt="[%Y-%m-%d %H:%M:%S]"
    ))
    logging.getLogger("gsdm").addHandler(file_handler)
    return file_handler


def remove_handler(handler: logging.Handler) -> None:
    """Detach and close a handler returned by ``add_file_handler``."""
    logging.getLogger("gsdm").removeHandler(handler)
    handler.close()


def make_progress() -> Progress:
    """Transient progress bar with spinner, description, bar, percentage and elapsed time."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        TimeElapsedColumn(),
        console=console,
        transient=True
    )
