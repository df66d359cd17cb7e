"""Three protocol variants at L=8, V=1: does any move the entropy-fluctuation
peak into the 1.6-1.8 region?
(1) outcomes drawn simultaneously from pre-sweep marginals;
(2) wrap-around hop without the fermionic string sign;
(3) longer steady-state window [10, 40]."""
import numpy as np, time
from zenochain import engine, measurement
from zenochain.dynamics import build_hamiltonian, build_propagator
from zenochain.fockspace import build_basis

grid = tuple(0.5 + 0.25 * k for k in range(13))

# --- (1) simultaneous marginals
def simultaneous_sweep_batch(A, empty_masks, eta, uniforms):
    L = empty_masks.shape[0]
    fired = np.zeros((L, uniforms.shape[1]), dtype=bool)
    if eta == 0.0:
        return fired
    sqrt_damp = np.sqrt(1.0 - eta)
    # probabilities for every site from the same pre-sweep state
    probs = np.empty((L, A.shape[1]))
    for j in range(L):
        sub = A[empty_masks[j]]
        probs[j] = np.einsum("ib,ib->b", sub.real, sub.real) + np.einsum("ib,ib->b", sub.imag, sub.imag)
    for j in range(L):
        empty = empty_masks[j]
        fire = uniforms[j] < eta * probs[j]
        fired[j] = fire
        A[empty] *= np.where(fire, 1.0, sqrt_damp)
        A[~empty] *= np.where(fire, 0.0, 1.0)
    # single renormalization per sweep; dead columns (impossible joint outcome) restart from nothing we care about here
    norms = np.sqrt(np.einsum("ib,ib->b", A.real, A.real) + np.einsum("ib,ib->b", A.imag, A.imag))
    bad = norms <= 1e-300
    norms[bad] = 1.0
    A /= norms
    return fired

orig = measurement.apply_sweep_batch
measurement.apply_sweep_batch = simultaneous_sweep_batch
cfg = engine.ProtocolConfig(L=(8,), V=1.0, g_grid=grid, n_traj=500, seed=901)
t0 = time.time(); res = engine.run_sweep(cfg, workers=1)
print(f"(1) simultaneous marginals ({time.time()-t0:.0f}s):")
for c in res.cells:
    print(f"  g={c.g:4.2f} S={c.stats.s_mean:.4f} dS={c.stats.s_std:.4f} mix_std={c.stats.mixedness_std:.4f}", flush=True)
measurement.apply_sweep_batch = orig

# --- (2) no boundary string sign: patch the propagator cache with a sign-free H
basis = build_basis(8, 4)
H = build_hamiltonian(basis, 1.0)
Hn = H.mat.copy()
wrap_mask = (1 << 7) | 1
configs = basis.configs
for k, c in enumerate(configs):
    occ7, occ0 = (int(c) >> 7) & 1, int(c) & 1
    if occ7 != occ0:
        tgt = int(c) ^ wrap_mask
        kk = basis.index_of(tgt)
        Hn[kk, k] = -1.0  # overwrite whatever sign the string produced
from zenochain.dynamics import HamiltonianMatrix
prop_nosign = build_propagator(HamiltonianMatrix(basis, 1.0, Hn), 0.01)
engine._PROPAGATOR_CACHE[(8, 4, 1.0, 0.01)] = prop_nosign
t0 = time.time(); res = engine.run_sweep(cfg, workers=1)
print(f"(2) sign-free wrap bond ({time.time()-t0:.0f}s):")
for c in res.cells:
    print(f"  g={c.g:4.2f} S={c.stats.s_mean:.4f} dS={c.stats.s_std:.4f} mix_std={c.stats.mixedness_std:.4f}", flush=True)
engine.clear_propagator_cache()

# --- (3) window [10, 40]
cfg3 = engine.ProtocolConfig(L=(8,), V=1.0, g_grid=grid, n_traj=500, seed=903, T1=10.0, T2=40.0)
t0 = time.time(); res = engine.run_sweep(cfg3, workers=1)
print(f"(3) window [10, 40] ({time.time()-t0:.0f}s):")
for c in res.cells:
    print(f"  g={c.g:4.2f} S={c.stats.s_mean:.4f} dS={c.stats.s_std:.4f} mix_std={c.stats.mixedness_std:.4f}", flush=True)
