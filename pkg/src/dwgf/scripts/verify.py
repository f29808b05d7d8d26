import logging
from typing import List, Optional

from rich.console import Console
from rich.table import Table

from dwgf.utils.verification import PropertyCheck, Suite, run_suite

pylogger = logging.getLogger(__name__)


def render_report(suite: str, checks: List[PropertyCheck], console: Optional[Console] = None) -> None:
    table = Table(title=f"verify {suite}")
    table.add_column("property")
    table.add_column("measured", justify="right")
    table.add_column("threshold", justify="right")
    table.add_column("result")

    for check in checks:
        result = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(check.name, f"{check.measured:.3e}", f"{check.threshold:.1e}", result)

    (console or Console()).print(table)


def verify(suite: str, console: Optional[Console] = None) -> bool:
    """Run one property suite, print the report, return whether every property passed."""
    checks = run_suite(Suite(suite))
    render_report(suite, checks, console=console)

    passed = all(check.passed for check in checks)
    if not passed:
        failed = [check.name for check in checks if not check.passed]
        pylogger.error(f"Suite <{suite}> failed: {', '.join(failed)}")
    return passed
