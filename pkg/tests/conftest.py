import numpy as np

from pointineq import make_config


def random_config(rng, p, m, min_rel_gap=0.05):
    """Gaussian points, resampled until no pair is much closer than the diameter."""
    while True:
        x = rng.normal(size=(p, m)) * rng.uniform(0.5, 3.0)
        d = np.linalg.norm(x[:, None] - x[None], axis=-1)
        off = d[~np.eye(p, dtype=bool)]
        if off.min() >= min_rel_gap * off.max():
            return make_config(x)


def random_angles(rng, p, min_gap=0.1):
    """Sorted angles in [0, 2pi) whose cyclic gaps are all at least ``min_gap``."""
    while True:
        a = np.sort(rng.uniform(0.0, 2 * np.pi, size=p))
        gaps = np.diff(np.append(a, a[0] + 2 * np.pi))
        if gaps.min() >= min_gap:
            return a


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    """Print and remember one PASS/FAIL line; the terminal summary repeats them."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
