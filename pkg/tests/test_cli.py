import csv
import json

import numpy as np
import pytest

from sparsefix.cli import expand_sweep, main
from sparsefix.data_io import read_pgm, write_libsvm, write_pgm
from sparsefix.linops import gaussian_kernel_matrix
from sparsefix.pipelines import (
    EXIT_CAPPED,
    EXIT_CONVERGED,
    EXIT_ERROR,
    ExperimentConfig,
    ParameterRangeWarning,
    predict_classification,
    predict_regression,
    run_experiment,
    synthetic_clusters,
    synthetic_image,
)
from sparsefix.trace import TRACE_HEADER, read_trace_csv

# ---------------------------------------------------------------- prediction


def test_predict_regression_examples(rng):
    pts = rng.standard_normal((5, 3))
    e1 = np.eye(5)[0]
    assert predict_regression(e1, pts, 2.0, pts[0]) == 1.0
    assert predict_regression(np.zeros(5), pts, 2.0, rng.standard_normal(3)) == 0.0


def test_predict_regression_matches_kernel_rows(rng):
    pts = rng.standard_normal((6, 4))
    v = rng.standard_normal(6)
    xs = rng.standard_normal((3, 4))
    K = gaussian_kernel_matrix(pts, 1.5).to_dense()
    for x in xs:
        row = np.array([np.exp(-np.sum((p - x) ** 2) / (2 * 1.5**2)) for p in pts])
        assert abs(predict_regression(v, pts, 1.5, x) - row @ v) <= 1e-14
    # batch form agrees with the point form, and with K on training points
    np.testing.assert_allclose(predict_regression(v, pts, 1.5, xs), [predict_regression(v, pts, 1.5, x) for x in xs])
    np.testing.assert_allclose(predict_regression(v, pts, 1.5, pts), K @ v, atol=1e-14)


def test_predict_classification_sign_convention(rng):
    pts = rng.standard_normal((4, 2))
    assert predict_classification(np.zeros(4), pts, 1.0, rng.standard_normal(2)) == 1.0
    assert predict_classification(np.eye(4)[0], pts, 1.0, pts[0]) == 1.0
    v = rng.standard_normal(4)
    xs = rng.standard_normal((20, 2))
    a = predict_classification(v, pts, 1.0, xs)
    b = predict_classification(-v, pts, 1.0, xs)
    assert np.all(a == -b)


# ---------------------------------------------------------------- config


def test_config_validation_and_aliases():
    cfg = ExperimentConfig.from_dict({"task": "regress", "lambda": 0.01})
    assert cfg.lam == 0.01 and cfg.resolved("gamma") == 0.005
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"task": "regress", "bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(task="deblur", model="l1-identity")
    with pytest.raises(ValueError):
        ExperimentConfig(task="regress", model="l1-tv")
    with pytest.raises(ValueError):
        ExperimentConfig(task="regress", lam=-1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(task="sing")


def test_task_defaults():
    assert ExperimentConfig(task="regress").resolved("tol") == 1e-6
    assert ExperimentConfig(task="classify").resolved("max_outer") == 50_000
    d = ExperimentConfig(task="deblur")
    assert d.resolved("tol") == 1e-5 and d.resolved("max_outer") == 2000
    assert ExperimentConfig(task="deblur", noise="poisson").error_sequence().kind == "inverse_power"


def test_out_of_range_parameters_only_warn():
    with pytest.warns(ParameterRangeWarning):
        ExperimentConfig(task="regress", lam=5.0).check_ranges()


# ---------------------------------------------------------------- experiments


def read_result(out):
    return json.loads((out / "result.json").read_text())


@pytest.mark.filterwarnings("ignore::sparsefix.pipelines.ParameterRangeWarning")
def test_deblur_identity_blur_noise_free(tmp_path):
    cfg = ExperimentConfig(task="deblur", model="l0", image_size=32, sigma=0.0, blur_length=1, lam=1e-3,
                           gamma=1e-4, out=str(tmp_path))
    assert run_experiment(cfg) == EXIT_CONVERGED
    res = read_result(tmp_path)
    assert res["psnr"] == "inf" or res["psnr"] >= 60
    restored = read_pgm(tmp_path / "restored.pgm")
    assert restored.shape == (32, 32)


def test_classify_separable_clusters(tmp_path):
    data = synthetic_clusters(seed=1, n=40)
    write_libsvm(tmp_path / "train.svm", data.subset(slice(0, 20)))
    write_libsvm(tmp_path / "test.svm", data.subset(slice(20, 40)))
    cfg = ExperimentConfig(task="classify", lam=0.01, data_path=str(tmp_path / "train.svm"),
                           test_path=str(tmp_path / "test.svm"), out=str(tmp_path / "o"))
    assert run_experiment(cfg) == EXIT_CONVERGED
    res = read_result(tmp_path / "o")
    assert res["train_accuracy"] == 1.0 and res["test_accuracy"] == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [dict(task="regress", lam=1e-3, max_outer=2000), dict(task="classify", lam=0.01),
     dict(task="deblur", lam=0.16, gamma=0.6, image_size=32, max_outer=100),
     dict(task="deblur", lam=0.1, gamma=1.0, p=0.01, noise="poisson", image_size=32, max_outer=100)],
)
def test_l0_traces_are_monotone(tmp_path, kwargs):
    run_experiment(ExperimentConfig(out=str(tmp_path), **kwargs))
    rows = read_trace_csv(tmp_path / "trace.csv")
    F = np.array([r["F"] for r in rows])
    assert np.all(np.diff(F) <= 1e-10 * (1 + np.abs(F[:-1])))
    assert read_result(tmp_path)["monotone"] is True


def test_trace_header(tmp_path):
    run_experiment(ExperimentConfig(task="classify", lam=0.01, out=str(tmp_path)))
    with open(tmp_path / "trace.csv") as fh:
        assert tuple(next(csv.reader(fh))) == TRACE_HEADER
    assert ",".join(TRACE_HEADER) == "k,F,du_norm,gradH_norm,nnz,inner_iters"


@pytest.mark.parametrize("model", ["l0", "l1-tv"])
def test_reruns_are_byte_identical(tmp_path, model):
    outs = []
    for i in range(2):
        out = tmp_path / str(i)
        cfg = ExperimentConfig(task="deblur", model=model, lam=0.2, gamma=0.6, image_size=24, blur_length=5,
                               max_outer=40, out="same")
        cfg.out = str(out)
        run_experiment(cfg)
        res = read_result(out)
        res.pop("wall_ms")
        res["config"].pop("out")
        outs.append(((out / "trace.csv").read_bytes(), json.dumps(res, sort_keys=True), (out / "restored.pgm").read_bytes()))
    assert outs[0] == outs[1]


@pytest.mark.filterwarnings("ignore::sparsefix.pipelines.ParameterRangeWarning")
def test_exit_codes(tmp_path):
    capped = ExperimentConfig(task="regress", lam=1e-3, max_outer=3, out=str(tmp_path / "c"))
    assert run_experiment(capped) == EXIT_CAPPED
    assert read_result(tmp_path / "c")["converged"] is False
    missing = ExperimentConfig(task="regress", data_path=str(tmp_path / "nope.svm"), out=str(tmp_path / "m"))
    assert run_experiment(missing) == EXIT_ERROR
    (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    bad = ExperimentConfig(task="deblur", image_path=str(tmp_path / "bad.pgm"), out=str(tmp_path / "b"))
    assert run_experiment(bad) == EXIT_ERROR


def test_solver_domain_error_exits_one(tmp_path, monkeypatch):
    import sparsefix.pipelines as pl
    from sparsefix.fidelity import DomainError

    def boom(cfg):
        raise DomainError("Poisson fidelity needs z > 0")

    monkeypatch.setattr(pl, "solve_experiment", boom)
    assert run_experiment(ExperimentConfig(task="deblur", noise="poisson", out=str(tmp_path))) == EXIT_ERROR
    assert not (tmp_path / "result.json").exists()


def test_poisson_zero_background_leaves_domain(tmp_path, caplog):
    # zero counts over most of the image drive B v below zero: abort with exit 1
    img = np.zeros((16, 16))
    img[4:10, 4:10] = 255.0
    write_pgm(img, tmp_path / "img.pgm")
    cfg = ExperimentConfig(task="deblur", noise="poisson", image_path=str(tmp_path / "img.pgm"), blur_length=3,
                           lam=0.1, gamma=1.0, p=0.01, max_outer=30, max_inner=200, out=str(tmp_path / "o"))
    assert run_experiment(cfg) == EXIT_ERROR
    assert "domain error" in caplog.text


# ---------------------------------------------------------------- command line


def test_main_with_config_file_and_overrides(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"lambda": 0.5, "gamma": 0.6, "image_size": 24, "blur_length": 5, "max_outer": 30}))
    code = main(["deblur", "--config", str(conf), "--lambda", "0.2", "--seed", "3", "--out", str(tmp_path / "o")])
    assert code in (EXIT_CONVERGED, EXIT_CAPPED)
    res = read_result(tmp_path / "o")
    assert res["config"]["lam"] == 0.2 and res["config"]["seed"] == 3 and res["config"]["gamma"] == 0.6
    assert (tmp_path / "o" / "restored.pgm").exists()


def test_main_reports_bad_config(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text("[1, 2]")
    assert main(["regress", "--config", str(conf)]) == EXIT_ERROR
    conf.write_text(json.dumps({"unknown_key": 1}))
    assert main(["regress", "--config", str(conf), "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert main(["regress", "--config", str(tmp_path / "missing.json")]) == EXIT_ERROR


def test_sweep_expansion_and_run(tmp_path):
    settings = {"task": "classify", "out": str(tmp_path), "sweep": {"lambda": [0.01, 0.1], "gamma": [0.001]}}
    points = expand_sweep(dict(settings))
    assert [p["lam"] for p in points] == [0.01, 0.1]
    assert points[1]["out"].endswith("run_001")
    conf = tmp_path / "s.json"
    conf.write_text(json.dumps(settings))
    assert main(["classify", "--config", str(conf), "--sweep", "--workers", "2"]) == EXIT_CONVERGED
    assert (tmp_path / "run_000" / "result.json").exists() and (tmp_path / "run_001" / "trace.csv").exists()


def test_synthetic_image_is_piecewise_constant():
    img = synthetic_image(64)
    assert img.shape == (64, 64)
    assert len(np.unique(img)) <= 5 and img.min() >= 0 and img.max() <= 255
