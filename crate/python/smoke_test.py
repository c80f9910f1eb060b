#!/usr/bin/env python3
"""Smoke test for the fedmuon_py extension module.

Builds the cdylib with cargo (release), copies it next to this script under
the importable name, then exercises the bound surface end to end:

    python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_extension() -> None:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "fedmuon-py"],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "release" / "libfedmuon_py.so"
    if not built.exists():  # macOS fallback
        built = ROOT / "target" / "release" / "libfedmuon_py.dylib"
    target = Path(__file__).resolve().parent / "fedmuon_py.so"
    shutil.copy2(built, target)


def approx(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol


def main() -> int:
    build_extension()
    sys.path.insert(0, str(Path(__file__).resolve().parent))
    import fedmuon_py as fm

    # matrices and the factorization
    a = fm.Mat([[3.0, 0.0], [0.0, 4.0]])
    assert a.shape == (2, 2)
    u, s, vt = fm.svd(a)
    assert s == [4.0, 3.0], s
    recon = sum(
        s[k] * u.get(i, k) * vt.get(k, j)
        for i in range(2)
        for j in range(2)
        for k in range(2)
        if i == j
    )
    assert approx(recon, 7.0), recon
    print("ok: svd on diag(3, 4) -> s =", s)

    # norms and duality
    assert approx(fm.norm(a, "trace"), 7.0)
    assert approx(fm.norm(a, "spectral"), 4.0)
    assert approx(fm.norm(a, "frobenius"), 5.0)
    assert approx(fm.norm(a, "schatten", p=2.0), 5.0)
    assert fm.dual_norm_kind("spectral") == "trace"
    print("ok: norms and dual geometry")

    # oracle identities
    d = fm.lmo_exact(a, "spectral")
    assert approx(fm.inner(a, d), -fm.norm(a, "trace"), 1e-8)
    assert approx(fm.norm(d, "spectral"), 1.0, 1e-8)
    t0 = fm.lmo_newton_schulz(a, iters=0)
    assert t0.tolist() == [[-0.6, 0.0], [0.0, -0.8]], t0.tolist()
    for iters in (1, 3, 7):
        out = fm.lmo_newton_schulz(a, iters=iters)
        assert fm.norm(out, "spectral") <= 1.0 + 1e-6
    print("ok: exact and newton-schulz oracles")

    # effective exponent
    kappa, p = fm.effective_p([3.0, 4.0], 0)
    assert kappa == 0.6 and p == 2.0
    _, p1 = fm.effective_p([3.0, 4.0], 1)
    assert approx(p1, 1.5709703450031636, 1e-12), p1
    print("ok: effective p, p(T=0) = 2, p(kappa=0.6, T=1) =", p1)

    # oracle bias witness: averaged directions cancel, direction of the
    # average does not
    mean_of, of_mean = fm.lmo_bias_witness(
        [fm.Mat([[-0.125]]), fm.Mat([[0.375]])], "euclidean_vec"
    )
    assert mean_of.get(0, 0) == 0.0 and of_mean.get(0, 0) == -1.0
    print("ok: oracle bias witness (0.0 vs -1.0)")

    # data partitioning
    labels = [i % 4 for i in range(200)]
    shards = fm.dirichlet_split(labels, 8, 0.1, 7)
    assert sorted(i for shard in shards for i in shard) == list(range(200))
    assert all(shards), "every shard must be non-empty"
    print("ok: dirichlet split over 8 clients")

    # a full in-memory run from a TOML config
    records = fm.run_experiment(
        """
        [problem]
        kind = "counterexample"

        [round]
        algorithm = "local_muon"
        n = 2
        s = 2
        k = 1
        eta = 0.01
        alpha = 0.5
        norm = "euclidean_vec"
        lmo = { kind = "exact" }

        [run]
        rounds = 64
        """
    )
    assert len(records) == 64
    assert all(approx(r["loss"], 0.15625, 1e-15) for r in records)
    assert all(approx(r["grad_frobenius"] ** 2, 0.0625, 1e-15) for r in records)
    print("ok: run_experiment, averaged-oracle method pinned at grad^2 = 0.0625")

    report = fm.counterexample(a=1.0, alpha=0.5, rounds=500)
    assert report["floor"] == 0.0625
    assert report["localmuon_constant"] is True
    assert report["fedmuon_min"] < report["floor"] / 100.0
    print(
        "ok: counterexample report, fedmuon escapes to",
        report["fedmuon_min"],
    )

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
