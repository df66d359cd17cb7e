"""Experiment: replace the sweep channel with a symmetric projective one:
with prob eta measure n_j projectively (occ/empty by Born), else do nothing."""
import numpy as np
import time
from zenochain import measurement, engine

def symmetric_sweep_batch(A, empty_masks, eta, uniforms):
    L = empty_masks.shape[0]
    fired = np.zeros((L, uniforms.shape[1]), dtype=bool)
    if eta == 0.0:
        return fired
    for j in range(L):
        empty = empty_masks[j]
        sub = A[empty]
        q_emp = np.einsum("ib,ib->b", sub.real, sub.real) + np.einsum("ib,ib->b", sub.imag, sub.imag)
        q_occ = 1.0 - q_emp
        u = uniforms[j]
        click_occ = u < eta * q_occ
        click_emp = (u >= eta * q_occ) & (u < eta)
        fired[j] = click_emp
        qo = np.where(q_occ > 0, q_occ, 1.0)
        qe = np.where(q_emp > 0, q_emp, 1.0)
        s_emp = np.where(click_occ, 0.0, np.where(click_emp, 1.0/np.sqrt(qe), 1.0))
        s_occ = np.where(click_occ, 1.0/np.sqrt(qo), np.where(click_emp, 0.0, 1.0))
        A[empty] = sub * s_emp
        A[~empty] *= s_occ
    return fired

measurement.apply_sweep_batch = symmetric_sweep_batch  # monkeypatch the engine's channel

grid = tuple(0.25 + 0.25 * k for k in range(14))
for L, n in ((6, 500), (8, 500)):
    t0 = time.time()
    cfg = engine.ProtocolConfig(L=(L,), V=1.0, g_grid=grid, n_traj=n, seed=555 + L)
    res = engine.run_sweep(cfg, workers=1)
    print(f"symmetric channel L={L} ({time.time()-t0:.0f}s):", flush=True)
    for c in res.cells:
        print(f"  g={c.g:4.2f} S={c.stats.s_mean:.4f} dS={c.stats.s_std:.4f} mix={c.stats.mixedness_mean:.4f}", flush=True)
