import logging

from rich.console import Console
from rich.logging import RichHandler

console = Console(stderr=True)


def setup_logging(verbose: bool = False) -> None:
    """Route every ``deskasm.*`` logger through a rich console handler."""
    handler = RichHandler(console=console, show_path=False, markup=False,
                          rich_tracebacks=verbose)
    handler.setFormatter(logging.Formatter("%(name)s  %(message)s"))
    root = logging.getLogger("deskasm")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False
