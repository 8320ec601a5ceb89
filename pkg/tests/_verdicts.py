"""One line per acceptance criterion, echoed in the terminal summary."""

LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
