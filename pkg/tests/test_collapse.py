import numpy as np
import pytest

from zenochain.collapse import (
    CollapseError,
    DataPoint,
    InsufficientDataError,
    bootstrap_param_errors,
    collapsed_coordinates,
    compare_ansatze,
    cost_function,
    critical_entropy_fit,
    delta_s_peaks,
    entropy_at_peaks,
    fluctuation_points,
    load_sweep_table,
    make_ansatz,
    minimize_cost,
    phase_diagram_fit,
    table_points,
)

IDENTITY = make_ansatz("entropy-2", crit_fit=(0.0, 0.0))
IDENTITY_PARAMS = {"g_c": 0.5, "nu": 1.0}


def planted_points(g_c=1.5, nu=1.2, gamma=0.0, sizes=(6, 8, 10, 12), n_g=16):
    """Noiseless observable drawn from a monotone scaling function."""
    pts = []
    for L in sizes:
        for g in np.linspace(0.5, 3.5, n_g):
            x = (g - g_c) * L ** (1.0 / nu)
            pts.append(DataPoint(L, float(g), float(L**gamma / (1.0 + np.exp(0.8 * x)))))
    return pts


# ------------------------------------------------------------ cost function

def test_cost_zero_for_monotone_data():
    pts = [DataPoint(4, 1.0, 1.0), DataPoint(4, 2.0, 2.0), DataPoint(4, 3.0, 5.0)]
    assert cost_function(pts, IDENTITY, IDENTITY_PARAMS) == pytest.approx(0.0, abs=1e-15)


def test_cost_direct_formula():
    pts = [DataPoint(4, 1.0, 0.0), DataPoint(4, 2.0, 1.0), DataPoint(4, 3.0, 0.0)]
    assert cost_function(pts, IDENTITY, IDENTITY_PARAMS) == pytest.approx(1.0, abs=1e-15)


def test_cost_rejects_degenerate_and_tiny_input():
    flat = [DataPoint(4, 1.0, 2.0), DataPoint(4, 2.0, 2.0), DataPoint(4, 3.0, 2.0)]
    with pytest.raises(CollapseError):
        cost_function(flat, IDENTITY, IDENTITY_PARAMS)
    with pytest.raises(CollapseError):
        cost_function(flat[:2], IDENTITY, IDENTITY_PARAMS)


def test_cost_affine_invariance():
    rng = np.random.default_rng(1)
    pts = [
        DataPoint(int(L), float(g), float(rng.standard_normal()))
        for L in (6, 8, 10)
        for g in np.linspace(0.5, 3.5, 9)
    ]
    params = {"g_c": 1.7, "nu": 1.4}
    base = cost_function(pts, IDENTITY, params)
    for alpha, beta in ((2.0, 0.0), (-3.5, 1.7), (0.25, -4.0)):
        mapped = [DataPoint(p.L, p.g, alpha * p.y + beta) for p in pts]
        assert cost_function(mapped, IDENTITY, params) == pytest.approx(base, abs=1e-12)


def test_sort_key_order_equivalence():
    # sorting by L sgn(g-gc)|g-gc|^nu and by (g-gc) L^(1/nu) give identical costs
    rng = np.random.default_rng(2)
    pts = [
        DataPoint(int(L), float(g), float(rng.standard_normal()))
        for L in (6, 8, 10, 12)
        for g in np.linspace(0.5, 3.5, 11)
    ]

    def cost_with_alternative_key(points, g_c, nu):
        L = np.array([p.L for p in points], dtype=float)
        g = np.array([p.g for p in points], dtype=float)
        y = np.array([p.y for p in points], dtype=float)
        order0 = np.lexsort((g, L))
        L, g, y = L[order0], g[order0], y[order0]
        key = (g - g_c) * L ** (1.0 / nu)
        ys = y[np.argsort(key, kind="stable")]
        return float(np.abs(np.diff(ys)).sum() / (ys.max() - ys.min()) - 1.0)

    for g_c, nu in ((1.2, 0.8), (1.7, 1.5), (2.3, 2.5)):
        ours = cost_function(pts, IDENTITY, {"g_c": g_c, "nu": nu})
        alt = cost_with_alternative_key(pts, g_c, nu)
        assert ours == pytest.approx(alt, abs=1e-13)


def test_cost_accepts_vector_params_and_validates():
    pts = planted_points()
    assert cost_function(pts, IDENTITY, np.array([1.5, 1.2])) >= 0.0
    with pytest.raises(CollapseError):
        cost_function(pts, IDENTITY, {"g_c": 1.5})
    with pytest.raises(CollapseError):
        cost_function(pts, IDENTITY, np.array([1.5, 1.2, 0.3]))


# ------------------------------------------------------------ minimization

def test_planted_collapse_recovery_shift_ansatz():
    fit = minimize_cost(planted_points(), IDENTITY)
    assert abs(fit.params["g_c"] - 1.5) / 1.5 < 0.02
    assert abs(fit.params["nu"] - 1.2) / 1.2 < 0.05
    assert fit.cost < 0.05


def test_planted_collapse_recovery_power_ansatz():
    pts = planted_points(gamma=0.3)
    fit = minimize_cost(pts, make_ansatz("entropy-1"))
    assert abs(fit.params["g_c"] - 1.5) / 1.5 < 0.02
    assert abs(fit.params["nu"] - 1.2) / 1.2 < 0.05
    assert abs(fit.params["gamma1"] - 0.3) < 0.1


def test_minimize_is_deterministic():
    pts = planted_points()
    f1 = minimize_cost(pts, IDENTITY)
    f2 = minimize_cost(pts, IDENTITY)
    assert f1.params == f2.params and f1.cost == f2.cost


def test_minimize_respects_bounds():
    fit = minimize_cost(planted_points(), IDENTITY, bounds={"g_c": (1.0, 1.3)})
    assert 1.0 <= fit.params["g_c"] <= 1.3


def test_compare_ansatze_checks_data():
    pts = planted_points(gamma=0.3)
    f1 = minimize_cost(pts, make_ansatz("entropy-1"))
    f2 = minimize_cost(pts, make_ansatz("entropy-2", crit_fit=(0.0, 0.0)))
    assert compare_ansatze(f1, f1) == 0.0
    assert isinstance(compare_ansatze(f1, f2), float)
    other = minimize_cost(planted_points(g_c=2.0), IDENTITY)
    with pytest.raises(ValueError):
        compare_ansatze(f1, other)


def test_purity_ansatz_transforms():
    pts = planted_points()
    f1 = minimize_cost(pts, make_ansatz("purity-1"))
    f2 = minimize_cost(pts, make_ansatz("purity-2"))
    for f in (f1, f2):
        assert f.cost >= 0.0
        assert 1.0 <= f.params["g_c"] <= 2.5


def test_make_ansatz_validation():
    with pytest.raises(CollapseError):
        make_ansatz("entropy-2")
    with pytest.raises(CollapseError):
        make_ansatz("entropy-3")
    with pytest.raises(CollapseError):
        make_ansatz("entropy-2", crit_fit=(1.0, 0.3), crit_model="cubic")


def test_entropy_shift_models():
    pts = planted_points()
    log_ansatz = make_ansatz("entropy-2", crit_fit=(0.4, 0.1))
    pow_ansatz = make_ansatz("entropy-2", crit_fit=(0.5, 0.33), crit_model="power")
    params = {"g_c": 1.5, "nu": 1.2}
    # both transforms evaluate; the shifted ordinates differ
    assert cost_function(pts, log_ansatz, params) >= 0.0
    assert cost_function(pts, pow_ansatz, params) >= 0.0
    L = np.array([8.0])
    assert log_ansatz.critical_shift(L)[0] == pytest.approx(0.4 * np.log(8.0) + 0.1)
    assert pow_ansatz.critical_shift(L)[0] == pytest.approx(0.5 * 8.0**0.33)


def test_bootstrap_errors():
    pts = [DataPoint(p.L, p.g, p.y, 0.01) for p in planted_points()]
    errs = bootstrap_param_errors(pts, IDENTITY, n_boot=8, seed=1)
    assert set(errs) == {"g_c", "nu"}
    assert all(v >= 0.0 for v in errs.values())
    with pytest.raises(CollapseError):
        bootstrap_param_errors(planted_points(), IDENTITY, n_boot=2)


# ------------------------------------------------------------ peaks

def test_peak_quadratic_refinement_is_exact():
    gs = np.arange(0.5, 3.51, 0.25)
    pts = [DataPoint(8, float(g), float(1.0 - (g - 1.7) ** 2)) for g in gs]
    pts += [DataPoint(10, float(g), float(1.0 - (g - 1.65) ** 2)) for g in gs]
    peaks = delta_s_peaks(pts)
    assert peaks.per_size[8] == pytest.approx(1.7, abs=1e-12)
    assert peaks.per_size[10] == pytest.approx(1.65, abs=1e-12)


def test_peak_extrapolation_recovers_linear_model():
    sizes = (6, 8, 10, 12)
    gs = np.arange(0.5, 3.51, 0.25)
    pts = []
    for L in sizes:
        center = 1.62 + 0.54 / L
        pts += [DataPoint(L, float(g), float(1.0 - (g - center) ** 2)) for g in gs]
    peaks = delta_s_peaks(pts)
    assert peaks.g_inf == pytest.approx(1.62, abs=1e-8)
    assert peaks.slope == pytest.approx(0.54, abs=1e-8)
    assert peaks.excluded == []


def test_peak_boundary_maximum_is_excluded():
    gs = np.arange(0.5, 3.51, 0.25)
    rising = [DataPoint(6, float(g), float(g)) for g in gs]  # max on the edge
    interior8 = [DataPoint(8, float(g), float(1.0 - (g - 1.7) ** 2)) for g in gs]
    interior10 = [DataPoint(10, float(g), float(1.0 - (g - 1.68) ** 2)) for g in gs]
    peaks = delta_s_peaks(rising + interior8 + interior10)
    assert peaks.excluded == [6]
    assert set(peaks.per_size) == {8, 10}

    with pytest.raises(InsufficientDataError):
        delta_s_peaks(rising + interior8)


# ------------------------------------------------------------ critical fits

def test_critical_entropy_fit_exact_log_data():
    sizes = np.array([6, 8, 10, 12])
    fit = critical_entropy_fit(sizes, 0.445 * np.log(sizes) + 0.417)
    assert fit.log_slope == pytest.approx(0.445, abs=1e-12)
    assert fit.log_offset == pytest.approx(0.417, abs=1e-12)
    assert fit.log_rms < 1e-12


def test_critical_entropy_fit_exact_power_data():
    sizes = np.array([6, 8, 10, 12])
    fit = critical_entropy_fit(sizes, sizes**0.326)
    assert fit.power_exp == pytest.approx(0.326, abs=1e-12)
    assert fit.power_amp == pytest.approx(1.0, abs=1e-12)
    assert fit.power_rms < 1e-10


def test_critical_entropy_fit_needs_three_sizes():
    with pytest.raises(InsufficientDataError):
        critical_entropy_fit([6, 8], [1.0, 1.2])


# ------------------------------------------------------------ phase diagram

def test_phase_diagram_fit_noiseless_recovery():
    V = np.array([0.5, 1.0, 2.0, 4.0])
    gc = 2.26 * np.exp(-0.31 * V**0.42)
    fit = phase_diagram_fit(V, gc)
    assert abs(fit.amplitude - 2.26) / 2.26 < 0.01
    assert abs(fit.rate - 0.31) / 0.31 < 0.01
    assert abs(fit.exponent - 0.42) / 0.42 < 0.01
    # V -> 0 limit of the fitted curve approaches the amplitude
    assert fit.amplitude * np.exp(-fit.rate * 1e-9**fit.exponent) == pytest.approx(fit.amplitude, rel=1e-3)


def test_phase_diagram_fit_validation():
    with pytest.raises(InsufficientDataError):
        phase_diagram_fit([1.0, 2.0, 3.0], [1.5, 1.4, 1.3])
    with pytest.raises(CollapseError):
        phase_diagram_fit([0.0, 1.0, 2.0, 3.0], [1.6, 1.5, 1.4, 1.3])


# ------------------------------------------------------------ tables

def test_collapsed_coordinates_sorted():
    pts = planted_points()
    key, ordinate, sizes = collapsed_coordinates(pts, IDENTITY, {"g_c": 1.5, "nu": 1.2})
    assert np.all(np.diff(key) >= 0)
    assert len(key) == len(pts)
    assert set(sizes) == {6, 8, 10, 12}


def test_sweep_table_io(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(
        "L,g,S_mean,S_std,mixedness_mean,mixedness_std,n_traj\n"
        "6,0.5,1.2,0.1,0.5,0.05,100\n"
        "6,0.75,1.1,0.1,0.45,0.05,100\n"
        "8,0.5,1.4,0.12,0.6,0.05,100\n"
    )
    rows = load_sweep_table(path)
    assert len(rows) == 3
    pts = table_points(rows, "entropy")
    assert pts[0].y == 1.2 and pts[0].y_err == pytest.approx(0.01)
    pts = table_points(rows, "purity")
    assert pts[2].y == 0.6
    fl = fluctuation_points(rows)
    assert fl[2].y == 0.12
    with pytest.raises(CollapseError):
        table_points(rows, "negativity")

    bad = tmp_path / "bad.csv"
    bad.write_text("L,g\n6,0.5\n")
    with pytest.raises(CollapseError):
        load_sweep_table(bad)

    with pytest.raises(CollapseError):
        load_sweep_table([path, path])  # duplicate cells


def test_entropy_at_peaks_interpolates():
    rows = [
        {"L": 6, "g": 1.0, "S_mean": 1.0, "S_std": 0.1, "mixedness_mean": 0, "mixedness_std": 0, "n_traj": 1},
        {"L": 6, "g": 2.0, "S_mean": 2.0, "S_std": 0.1, "mixedness_mean": 0, "mixedness_std": 0, "n_traj": 1},
    ]
    sizes, values = entropy_at_peaks(rows, {6: 1.25})
    assert sizes.tolist() == [6]
    assert values[0] == pytest.approx(1.25)
