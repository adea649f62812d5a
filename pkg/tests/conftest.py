import numpy as np
import pytest

from cavityband import SystemParams, band_sweep

SINGLE = SystemParams(kappa=350.0, n_atoms=1e4, u0=1.0, eta=909.9, delta_c=1350.0)
LOOPED = SINGLE.with_(delta_c=3140.0)
# onset-of-bistability scans use the same cavity with eta and delta_c free
CAVITY = SystemParams(kappa=350.0, n_atoms=1e4, u0=1.0, eta=0.0, delta_c=0.0)
STAB = LOOPED.with_(eta=2.8 * 325.0)


@pytest.fixture(scope="session")
def looped_band():
    return band_sweep(LOOPED, 0, np.linspace(-1.0, 1.0, 41), workers=1)


@pytest.fixture(scope="session")
def single_band():
    return band_sweep(SINGLE, 0, np.linspace(-1.0, 1.0, 41), workers=1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
