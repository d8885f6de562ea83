import numpy as np
import pytest

from twpacal import ComponentSpec
from twpacal.chain import ChainScenario, TrlStandardsSpec
from twpacal.network import NetworkData


def random_passive_s(rng: np.random.Generator, n: int, min_s21: float = 0.3) -> np.ndarray:
    """Random passive two-port stack with a transmission floor.

    Reflections up to ~0.3, transmissions in [min_s21, 0.9], random
    phases, scaled down wherever the largest singular value would exceed
    0.98.
    """
    def polar(lo, hi):
        mag = rng.uniform(lo, hi, n)
        ph = rng.uniform(0, 2 * np.pi, n)
        return mag * np.exp(1j * ph)

    s = np.empty((n, 2, 2), dtype=complex)
    s[:, 0, 0] = polar(0.0, 0.3)
    s[:, 1, 1] = polar(0.0, 0.3)
    s[:, 1, 0] = polar(min_s21, 0.9)
    s[:, 0, 1] = polar(min_s21, 0.9)
    smax = np.linalg.svd(s, compute_uv=False)[:, 0]
    scale = np.where(smax > 0.98, 0.98 / smax, 1.0)
    return s * scale[:, None, None]


def random_passive_network(rng, frequencies, min_s21: float = 0.3) -> NetworkData:
    f = np.asarray(frequencies, dtype=float)
    return NetworkData(f, random_passive_s(rng, f.size, min_s21))


@pytest.fixture
def grid401():
    return np.linspace(4e9, 8e9, 401)


def attenuator_phase_scenario(grid, noise_sigma=0.0, seed=0, dut_db=6.0) -> ChainScenario:
    """The validation setup: attenuator + phase-line error boxes, 6 dB DUT."""
    return ChainScenario(
        grid=grid,
        x_chain=(
            ComponentSpec("attenuator", {"db": 3.0}),
            ComponentSpec("delay_line", {"delay_s": 13.9e-12}),
        ),
        y_chain=(
            ComponentSpec("attenuator", {"db": 2.0}),
            ComponentSpec("delay_line", {"delay_s": 20.8e-12}),
        ),
        dut=ComponentSpec("attenuator", {"db": dut_db}),
        noise_sigma=noise_sigma,
        seed=seed,
        standards=TrlStandardsSpec(line_delay_s=41.666e-12, reflect_offset_delay_s=25e-12),
    )


def mismatched_chain_scenario(grid, noise_sigma=0.0, seed=0) -> ChainScenario:
    """Error boxes with nonzero reflections (couplers) on both sides."""
    return ChainScenario(
        grid=grid,
        x_chain=(
            ComponentSpec("attenuator", {"db": 3.0}),
            ComponentSpec("coupler", {"insertion_loss_db": 0.3, "return_loss_db": 15.0}),
            ComponentSpec("delay_line", {"delay_s": 13.9e-12}),
        ),
        y_chain=(
            ComponentSpec("coupler", {"insertion_loss_db": 0.4, "return_loss_db": 18.0}),
            ComponentSpec("delay_line", {"delay_s": 20.8e-12}),
        ),
        dut=ComponentSpec("attenuator", {"db": 6.0}),
        noise_sigma=noise_sigma,
        seed=seed,
        standards=TrlStandardsSpec(line_delay_s=41.666e-12, reflect_offset_delay_s=25e-12),
    )
