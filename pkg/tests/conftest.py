"""Shared fixtures and independent oracles.

``oracle_dense_matrix`` rebuilds the observation matrix with scalar math and
cmath loops, including its own index decoding, so it shares no code with the
package's vectorized operator path.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from nfmimo import (
    ArrayGeometry,
    ConstantPulse,
    FrequencyGrid,
    ImagingScenario,
    Vec3,
    VoxelGrid,
    make_spiral_array,
)

# one line per acceptance criterion, re-emitted after the run so the verdicts
# survive pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def oracle_dense_matrix(scenario: ImagingScenario) -> np.ndarray:
    """Scalar-loop dense operator, independent of nfmimo.forward."""
    assert isinstance(scenario.pulse, ConstantPulse)
    p = scenario.pulse.value
    fg = scenario.frequencies
    if fg.count == 1:
        freqs = [fg.f_start]
    else:
        step = (fg.f_stop - fg.f_start) / (fg.count - 1)
        freqs = [fg.f_start + i * step for i in range(fg.count)]
    tx = [(v.x, v.y, v.z) for v in scenario.array.transmitters]
    rx = [(v.x, v.y, v.z) for v in scenario.array.receivers]
    nx, ny, nz = scenario.voxels.dims
    ex, ey, ez = scenario.voxels.extent
    cx, cy, cz = scenario.voxels.center.x, scenario.voxels.center.y, scenario.voxels.center.z
    dx = ex / (nx - 1) if nx > 1 else 0.0
    dy = ey / (ny - 1) if ny > 1 else 0.0
    dz = ez / (nz - 1) if nz > 1 else 0.0
    voxels = []
    for iz in range(nz):  # x fastest means x is the innermost loop
        for iy in range(ny):
            for ix in range(nx):
                voxels.append(
                    (cx - ex / 2 + ix * dx, cy - ey / 2 + iy * dy, cz - ez / 2 + iz * dz)
                )
    rows = []
    for f in freqs:  # receiver fastest: f slowest, then tx, then rx
        for t in tx:
            for r in rx:
                row = []
                for v in voxels:
                    d_t = math.dist(t, v)
                    d_r = math.dist(r, v)
                    phase = cmath.exp(-1j * (2 * math.pi / scenario.c) * f * (d_t + d_r))
                    row.append(p * phase / (4 * math.pi * d_t * d_r))
                rows.append(row)
    return np.array(rows, dtype=np.complex128)


def random_complex(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def fd_gradient(dense: np.ndarray, s: np.ndarray, y: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of the mean-squared-error objective with
    respect to the real and imaginary part of every voxel."""
    m_count = dense.shape[0]

    def objective(sv):
        r = y - dense @ sv
        return float(np.real(np.vdot(r, r))) / (2.0 * m_count)

    g = np.zeros(s.size, dtype=np.complex128)
    for n in range(s.size):
        e = np.zeros(s.size, dtype=np.complex128)
        e[n] = h
        d_re = (objective(s + e) - objective(s - e)) / (2 * h)
        d_im = (objective(s + 1j * e) - objective(s - 1j * e)) / (2 * h)
        g[n] = d_re + 1j * d_im
    return g


def golden_section_prox(v: complex, alpha: float) -> complex:
    """Per-entry prox of alpha*|.| by golden-section search on the magnitude."""
    mag = abs(v)
    if mag == 0.0:
        return 0.0

    def objective(t):
        return 0.5 * (t - mag) ** 2 + alpha * t

    lo, hi = 0.0, mag + alpha + 1.0
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > 1e-13:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    t = 0.5 * (a + b)
    return t * v / mag


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_scenario() -> ImagingScenario:
    """2 freqs x 2 Tx x 2 Rx = 8 channels, 2x2x1 = 4 voxels."""
    return ImagingScenario(
        array=ArrayGeometry(
            transmitters=(Vec3(0.05, 0.0, 0.0), Vec3(-0.05, 0.02, 0.0)),
            receivers=(Vec3(0.0, 0.04, 0.0), Vec3(0.01, -0.03, 0.0)),
        ),
        frequencies=FrequencyGrid(5e9, 7e9, 2),
        voxels=VoxelGrid(center=Vec3(0.0, 0.0, 0.35), extent=(0.1, 0.1, 0.0), dims=(2, 2, 1)),
    )


@pytest.fixture(scope="session")
def small_scenario() -> ImagingScenario:
    """3 freqs x 3 Tx x 2 Rx = 18 channels, 3x2x2 = 12 voxels."""
    return ImagingScenario(
        array=make_spiral_array(3, 2, 0.15, rng_seed=3),
        frequencies=FrequencyGrid(4e9, 9e9, 3),
        voxels=VoxelGrid(center=Vec3(0.0, 0.0, 0.3), extent=(0.12, 0.08, 0.06), dims=(3, 2, 2)),
    )
