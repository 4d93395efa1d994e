"""End-to-end acceptance checks, one test per criterion.

Each test prints ``PASS``/``FAIL`` with the measured quantity and the
threshold, then asserts. Run with ``pytest tests/test_acceptance.py``;
the summary lines also appear in the terminal report.
"""

import json
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from holoflow.cli import run
from holoflow.field import davis_skodje, expression_field, linear2d
from holoflow.integrator import IntegratorConfig, integrate_path, path_commutativity_defect
from holoflow.sim import SimGraph, classifier_validation, invariance_residual, known_graph
from holoflow.spectral import classify_sim_membership, fft, imaginary_time_spectrum, suggest_fast_band
from holoflow.surface import cauchy_riemann_residual, sample_surface


def check(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_c01_integrator_accuracy():
    start = time.perf_counter()
    traj = integrate_path(linear2d(5), [1, 1], [0, 1], IntegratorConfig(rtol=1e-10))
    elapsed = time.perf_counter() - start
    err = np.abs(traj.end - [math.exp(-1), math.exp(-5)])
    check("1 integrator accuracy", bool(np.all(err < 1e-9)) and elapsed < 1,
          f"errors {err[0]:.2e}, {err[1]:.2e} (< 1e-9), {elapsed:.3f} s (< 1 s)")


def test_c02_imaginary_time_exponential():
    traj = integrate_path(expression_field(["-x1"]), [1], [0, 1j * math.pi])
    err = abs(traj.end[0] + 1)
    check("2 imaginary-time exponential", err < 1e-9, f"|z(i pi) + 1| = {err:.2e} (< 1e-9)")


def test_c03_fft_oracle():
    rng = np.random.default_rng(2024)
    x = rng.normal(size=256) + 1j * rng.normal(size=256)
    k = np.arange(256)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / 256) @ x
    diff = np.max(np.abs(fft(x) - dft))
    check("3 FFT vs brute-force DFT", diff < 1e-10, f"max diff {diff:.2e} (< 1e-10)")


def test_c04_spectral_peaks():
    f = linear2d(5)
    off = imaginary_time_spectrum(f, [1, 1], 0.0, 16 * math.pi, 1024, "hann")
    on = imaginary_time_spectrum(f, [1, 0], 0.0, 16 * math.pi, 1024, "hann")
    peaks = [float(p) for p in off.peaks(2)]
    targets = (-1 / (2 * math.pi), -5 / (2 * math.pi))
    located = all(min(abs(p - t) for p in peaks) <= off.bin_width for t in targets)
    band = suggest_fast_band(f, [0, 0], 1)
    rho_on = classify_sim_membership(on, band).ratio
    rho_off = classify_sim_membership(off, band).ratio
    ok = located and rho_on < 1e-6 and rho_off >= 1e3 * rho_on
    check("4 spectral peaks", ok,
          f"off-SIM peaks {sorted(round(p, 4) for p in peaks)} vs {sorted(round(t, 4) for t in targets)} "
          f"(one bin = {off.bin_width:.4f}); "
          f"rho on {rho_on:.2e} (< 1e-6), off {rho_off:.2e} (>= 1e3 x on)")


def test_c05_classifier_validation():
    lin = classifier_validation("linear2d", 5, [(1, 0), (2, 0), (1, 1), (1, -1)])
    ds = classifier_validation("davis_skodje", 10, [(0.5, 1 / 3), (0.8, 0.8 / 1.8), (0.5, 0.5), (0.8, 0.9)])
    correct = lin.correct + ds.correct
    ratios = ", ".join(f"{tuple(p['point'])}: {p['verdict']} rho={p['ratio']:.3g}" for p in ds.points)
    check("5 classifier validation", correct == 8,
          f"{correct}/8 (linear2d {lin.correct}/4, davis_skodje {ds.correct}/4; {ratios})")


def test_c06_holomorphy():
    f = linear2d(5)
    coarse = cauchy_riemann_residual(sample_surface(f, [1, 1], (0, 1), (-1, 1), 41, 41)).max_residual
    fine = cauchy_riemann_residual(sample_surface(f, [1, 1], (0, 1), (-1, 1), 81, 81)).max_residual
    factor = coarse / fine
    check("6 Cauchy-Riemann refinement", factor >= 3.5,
          f"41x41 {coarse:.3e} -> 81x81 {fine:.3e}, factor {factor:.2f} (>= 3.5)")


def test_c07a_commutativity_linear():
    d = path_commutativity_defect(linear2d(5), [1, 1], 1, 1)
    check("7a L-path commutativity, linear2d", d < 1e-8, f"defect {d:.2e} (< 1e-8)")


def test_c07b_ramification_davis_skodje():
    # the rectangle [0, 1] x [0, 4] encloses the pole at t = ln 1.2 + i pi
    d = path_commutativity_defect(davis_skodje(10), [1.2, 0.5], 1, 4)
    check("7b L-path defect around Davis-Skodje pole", d > 1e-2, f"defect {d:.2e} (> 1e-2)")


def test_c08_invariance():
    f, g = davis_skodje(10), known_graph("davis_skodje")
    worst = max(float(np.max(np.abs(invariance_residual(f, g, [x])))) for x in np.linspace(0, 3, 100))
    bumped = SimGraph.from_sources([1], [2], ["x1/(1+x1) + 0.01"])
    r = float(np.max(np.abs(invariance_residual(f, bumped, [1.0]))))
    check("8 invariance residual", worst < 1e-9 and r > 1e-3,
          f"exact graph max |R| {worst:.2e} (< 1e-9), perturbed |R| {r:.3e} (> 1e-3)")


def _config(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_c09_figure_reproduction(tmp_path):
    cfg = {"system": {"builtin": "linear2d", "params": {"gamma": 5}},
           "initial_values": [[1, 0], [1, 1]],
           "surface": {"sigma": [-0.5, 1], "tau": ["-pi", "pi"], "n_sigma": 16, "n_tau": 33}}
    out = tmp_path / "fig"
    code = run("surface", _config(tmp_path, cfg), str(out), 1)
    svgs = [out / "surface_000.svg", out / "surface_001.svg"]
    red = all(p.exists() and 'class="real-time"' in p.read_text() and 'stroke="red"' in p.read_text()
              for p in svgs)
    runs = json.loads((out / "manifest.json").read_text())["summary"]["runs"]
    tv_on, tv_off = runs[0]["tau_total_variation"], runs[1]["tau_total_variation"]
    ok = code == 0 and red and tv_off >= 5 * tv_on
    check("9 surface figures", ok,
          f"exit {code}, red real-time polyline in both SVGs: {red}; "
          f"tau variation off {tv_off:.1f} vs on {tv_on:.1f}, ratio {tv_off / tv_on:.1f} (>= 5)")


def test_c10_determinism(tmp_path):
    cfg = {"system": {"builtin": "davis_skodje", "params": {"gamma": 10}},
           "initial_values": [[0.5, 0.5], [1, 0.5], [0.3, 0.1]],
           "path": [0, "1+i", "2*i"],
           "surface": {"sigma": [0, 1], "tau": [-2, 4], "n_sigma": 5, "n_tau": 13},
           "spectral": {"n": 256, "tau_span": "4*pi"},
           "residual": {"points": [[0.1], [0.7]]}}
    p = _config(tmp_path, cfg)
    mismatched = []
    for command in ("integrate", "surface", "spectrum", "classify", "residual"):
        snaps = []
        for tag, workers in (("a", 1), ("b", 4), ("c", 1)):
            out = tmp_path / f"{command}-{tag}"
            run(command, p, str(out), workers)
            snaps.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
        if not (snaps[0] == snaps[1] == snaps[2] and snaps[0]):
            mismatched.append(command)
    check("10 determinism across runs and worker counts", not mismatched,
          f"mismatched commands: {mismatched or 'none'}")
