import json

import yaml

from streamcoach.cli import (
    EXIT_BANDS,
    EXIT_OK,
    EXIT_VALIDATION,
    default_config,
    main,
    resolve_config,
)

_SMALL = [
    "--set", "gen.n_sessions=3",
    "--set", "gen.check_bands=false",
    "--set", "train.epochs=2",
    "--set", "train.batch_size=4",
]


def test_resolve_config_overrides():
    cfg = resolve_config(None, ["synth.tick_len=0.5", "gen.n_sessions=7"])
    assert cfg["synth"]["tick_len"] == 0.5
    assert cfg["gen"]["n_sessions"] == 7
    # untouched defaults survive
    assert cfg["train"]["beta2"] == default_config()["train"]["beta2"]


def test_resolve_config_file_merge(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("gen:\n  n_sessions: 4\n")
    cfg = resolve_config(str(path), ["gen.seed=9"])
    assert cfg["gen"]["n_sessions"] == 4
    assert cfg["gen"]["seed"] == 9


def test_bad_override_is_validation_error(tmp_path):
    rc = main(["--set", "nonsense", "gen", "--out", str(tmp_path / "o")])
    assert rc == EXIT_VALIDATION


def test_gen_band_failure_exit_code(tmp_path):
    # 1 session is far too small a sample to sit inside the bands reliably;
    # force failure with an impossible band instead of relying on noise
    rc = main(
        [
            "--set", "gen.n_sessions=2",
            "--set", "gen.bands.mean_silence_s=[0.0, 0.001]",
            "gen", "--out", str(tmp_path / "g"),
        ]
    )
    assert rc == EXIT_BANDS
    stats = json.loads((tmp_path / "g" / "stats.json").read_text())
    assert stats["bands_ok"] is False
    assert stats["band_failures"]


def test_full_pipeline(tmp_path):
    gen = tmp_path / "gen"
    tr = tmp_path / "train"
    runs = {}
    assert main(_SMALL + ["gen", "--out", str(gen)]) == EXIT_OK
    assert (gen / "sessions.jsonl").exists()
    assert (gen / "stats.json").exists()
    assert (gen / "config_resolved.yaml").exists()
    resolved = yaml.safe_load((gen / "config_resolved.yaml").read_text())
    assert resolved["gen"]["n_sessions"] == 3

    assert (
        main(_SMALL + ["train", "--sessions", str(gen / "sessions.jsonl"), "--out", str(tr)])
        == EXIT_OK
    )
    assert (tr / "checkpoint.npz").exists()
    curve = (tr / "loss_curve.csv").read_text().splitlines()
    assert curve[0] == "epoch,loss"
    assert len(curve) == 3

    for policy in ("stream", "fixed", "oracle", "silent"):
        out = tmp_path / f"run_{policy}"
        args = _SMALL + [
            "run", "--sessions", str(gen / "sessions.jsonl"),
            "--policy", policy, "--out", str(out),
        ]
        if policy == "stream":
            args += ["--checkpoint", str(tr / "checkpoint.npz")]
        assert main(args) == EXIT_OK
        runs[policy] = out / "predictions.jsonl"
        assert runs[policy].exists()

    ev = tmp_path / "eval"
    assert (
        main(
            _SMALL
            + [
                "eval", "--sessions", str(gen / "sessions.jsonl"),
                "--predictions", str(runs["oracle"]), "--out", str(ev),
            ]
        )
        == EXIT_OK
    )
    report = json.loads((ev / "report.json").read_text())
    assert report["temporal_f_score"] == 1.0
    assert (ev / "report.txt").read_text().startswith("policy")

    cmp_dir = tmp_path / "cmp"
    assert (
        main(
            _SMALL
            + [
                "compare", "--sessions", str(gen / "sessions.jsonl"),
                "--predictions", str(runs["fixed"]), str(runs["oracle"]),
                "--out", str(cmp_dir),
            ]
        )
        == EXIT_OK
    )
    table = (cmp_dir / "report.txt").read_text()
    assert "fixed" in table and "oracle" in table


def test_pipeline_outputs_are_byte_identical(tmp_path):
    outs = []
    for tag in ("a", "b"):
        gen = tmp_path / f"gen_{tag}"
        tr = tmp_path / f"tr_{tag}"
        run = tmp_path / f"run_{tag}"
        assert main(_SMALL + ["gen", "--out", str(gen)]) == EXIT_OK
        assert (
            main(_SMALL + ["train", "--sessions", str(gen / "sessions.jsonl"), "--out", str(tr)])
            == EXIT_OK
        )
        assert (
            main(
                _SMALL
                + [
                    "run", "--sessions", str(gen / "sessions.jsonl"),
                    "--policy", "stream", "--checkpoint", str(tr / "checkpoint.npz"),
                    "--out", str(run),
                ]
            )
            == EXIT_OK
        )
        outs.append((gen, tr, run))
    (ga, ta, ra), (gb, tb, rb) = outs
    assert (ga / "sessions.jsonl").read_bytes() == (gb / "sessions.jsonl").read_bytes()
    assert (ta / "checkpoint.npz").read_bytes() == (tb / "checkpoint.npz").read_bytes()
    assert (ra / "predictions.jsonl").read_bytes() == (rb / "predictions.jsonl").read_bytes()


def test_stream_without_checkpoint_is_validation_error(tmp_path):
    gen = tmp_path / "gen"
    assert main(_SMALL + ["gen", "--out", str(gen)]) == EXIT_OK
    rc = main(
        _SMALL
        + [
            "run", "--sessions", str(gen / "sessions.jsonl"),
            "--policy", "stream", "--out", str(tmp_path / "r"),
        ]
    )
    assert rc == EXIT_VALIDATION


def test_eval_judge_flag_without_endpoint(tmp_path, monkeypatch):
    monkeypatch.delenv("STREAMCOACH_JUDGE_URL", raising=False)
    gen = tmp_path / "gen"
    run = tmp_path / "run"
    assert main(_SMALL + ["gen", "--out", str(gen)]) == EXIT_OK
    assert (
        main(
            _SMALL
            + [
                "run", "--sessions", str(gen / "sessions.jsonl"),
                "--policy", "oracle", "--out", str(run),
            ]
        )
        == EXIT_OK
    )
    rc = main(
        _SMALL
        + [
            "eval", "--sessions", str(gen / "sessions.jsonl"),
            "--predictions", str(run / "predictions.jsonl"),
            "--out", str(tmp_path / "ev"), "--judge",
        ]
    )
    assert rc == EXIT_VALIDATION


def test_missing_sessions_file_is_validation_error(tmp_path):
    rc = main(
        ["run", "--sessions", str(tmp_path / "nope.jsonl"), "--policy", "silent",
         "--out", str(tmp_path / "o")]
    )
    assert rc == EXIT_VALIDATION
