"""End-to-end command-line checks: extract, evaluate, train, predict, stats."""

import numpy as np
import pytest

from emovox.cli import main
from emovox.manifest import ManifestRow, write_manifest

from conftest import make_corpus


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Shared corpus + config; module scope so the cache warms across tests."""
    root = tmp_path_factory.mktemp("cli")
    rows = make_corpus(root, n_per_class=8, seed=2)
    manifest = root / "corpus.csv"
    write_manifest(manifest, rows)
    config = root / "exp.cfg"
    config.write_text(
        "scheme = phonation\n"
        "mode = speaker_independent\n"
        "k_outer = 2\n"
        "k_inner = 2\n"
        "c_exp_min = 0\nc_exp_max = 1\n"
        "gamma_exp_min = -2\ngamma_exp_max = -1\n"
        "seed = 5\n"
        "cache_dir = %s\n" % (root / "cache"))
    return root, manifest, config, rows


def test_extract_success(workspace):
    root, manifest, config, rows = workspace
    out = root / "features.csv"
    rc = main(["extract", "--manifest", str(manifest), "--config", str(config),
               "--out-csv", str(out)])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == len(rows) + 1
    assert lines[0].split(",") == ["source_id"] + ["f%d" % i for i in range(28)]
    values = [float(c) for c in lines[1].split(",")[1:]]
    assert np.all(np.isfinite(values))


def test_extract_warm_cache_identical(workspace):
    root, manifest, config, _ = workspace
    a, b = root / "cold.csv", root / "warm.csv"
    main(["extract", "--manifest", str(manifest), "--config", str(config),
          "--out-csv", str(a)])
    rc = main(["extract", "--manifest", str(manifest), "--config", str(config),
               "--out-csv", str(b)])
    assert rc == 0
    assert a.read_bytes() == b.read_bytes()


def test_extract_partial_on_missing_file(workspace, caplog):
    root, _, config, rows = workspace
    broken = rows + [ManifestRow(str(root / "gone.wav"), "rough", "spk9", "f")]
    manifest = root / "broken.csv"
    write_manifest(manifest, broken)
    out = root / "partial.csv"
    with caplog.at_level("WARNING", logger="emovox"):
        rc = main(["extract", "--manifest", str(manifest),
                   "--config", str(config), "--out-csv", str(out)])
    assert rc == 1
    assert len(out.read_text().strip().split("\n")) == len(rows) + 1
    assert any("gone.wav" in r.message for r in caplog.records)


def test_extract_fatal_when_nothing_succeeds(workspace):
    root, _, config, _ = workspace
    manifest = root / "all_missing.csv"
    write_manifest(manifest, [
        ManifestRow(str(root / "nope1.wav"), "x", "s", "m"),
        ManifestRow(str(root / "nope2.wav"), "x", "s", "m"),
    ])
    rc = main(["extract", "--manifest", str(manifest), "--config", str(config),
               "--out-csv", str(root / "none.csv")])
    assert rc == 2


def test_extract_fatal_on_bad_manifest(workspace):
    root, _, config, _ = workspace
    bad = root / "bad.csv"
    bad.write_text("wrong,header\n")
    rc = main(["extract", "--manifest", str(bad), "--config", str(config),
               "--out-csv", str(root / "x.csv")])
    assert rc == 2


def test_evaluate_writes_reports(workspace):
    root, manifest, config, _ = workspace
    report = root / "report.txt"
    metrics = root / "metrics.csv"
    roc = root / "roc.csv"
    rc = main(["evaluate", "--manifest", str(manifest), "--config", str(config),
               "--report", str(report), "--metrics-csv", str(metrics),
               "--roc-csv", str(roc)])
    assert rc == 0
    text = report.read_text()
    assert "mean_uar: " in text
    uar = float(text.split("mean_uar: ")[1].splitlines()[0])
    assert uar >= 0.95
    lines = metrics.read_text().strip().split("\n")
    assert lines[0].startswith("fold,c,gamma")
    assert len(lines) == 3  # header + 2 outer folds
    for line in lines[1:]:
        c, gamma = float(line.split(",")[1]), float(line.split(",")[2])
        assert c in (1.0, 10.0)
        assert gamma in (0.01, 0.1)
    roc_lines = roc.read_text().strip().split("\n")
    assert roc_lines[0] == "fpr,tpr"
    fprs = [float(l.split(",")[0]) for l in roc_lines[1:]]
    assert all(b >= a for a, b in zip(fprs, fprs[1:]))


def test_evaluate_same_seed_byte_identical(workspace):
    root, manifest, config, _ = workspace
    pairs = []
    for tag in ("r1", "r2"):
        report = root / ("%s.txt" % tag)
        metrics = root / ("%s_metrics.csv" % tag)
        rc = main(["evaluate", "--manifest", str(manifest),
                   "--config", str(config), "--report", str(report),
                   "--metrics-csv", str(metrics),
                   "--roc-csv", str(root / ("%s_roc.csv" % tag))])
        assert rc == 0
        pairs.append((report.read_bytes(), metrics.read_bytes()))
    assert pairs[0] == pairs[1]


def test_train_then_predict(workspace):
    root, manifest, config, rows = workspace
    model = root / "m.svm"
    rc = main(["train", "--manifest", str(manifest), "--config", str(config),
               "--model", str(model)])
    assert rc == 0
    out = root / "pred.csv"
    rc = main(["predict", "--manifest", str(manifest), "--config", str(config),
               "--model", str(model), "--out-csv", str(out)])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "source_id,label,score_rough,score_smooth"
    assert len(lines) == len(rows) + 1
    want = {r.path: r.label for r in rows}
    hits = 0
    for line in lines[1:]:
        source, label = line.split(",")[:2]
        hits += int(want[source] == label)
    assert hits / len(rows) >= 0.99

    again = root / "pred2.csv"
    main(["predict", "--manifest", str(manifest), "--config", str(config),
          "--model", str(model), "--out-csv", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_predict_scheme_mismatch(workspace):
    root, manifest, config, _ = workspace
    model = root / "m.svm"
    other = root / "other.cfg"
    other.write_text("scheme = prosody\ncache_dir = %s\n" % (root / "cache"))
    rc = main(["predict", "--manifest", str(manifest), "--config", str(other),
               "--model", str(model), "--out-csv", str(root / "no.csv")])
    assert rc == 2


def make_stats_manifest(path, rng):
    rows = []
    for i in range(40):
        dur = max(1.0, rng.normal(34.0, 23.0))
        rows.append(ManifestRow("long/%d.wav" % i, "dissatisfied",
                                "s%d" % i, "m" if i % 4 else "f", dur))
    for i in range(40):
        dur = max(1.0, rng.normal(16.0, 11.0))
        rows.append(ManifestRow("short/%d.wav" % i, "satisfied",
                                "t%d" % i, "f" if i % 4 else "m", dur))
    write_manifest(path, rows)
    return rows


def test_stats_two_class_report(tmp_path, rng):
    manifest = tmp_path / "stats.csv"
    make_stats_manifest(manifest, rng)
    out = tmp_path / "stats.txt"
    rc = main(["stats", "--manifest", str(manifest), "--out", str(out)])
    assert rc == 0
    text = out.read_text()
    assert "class dissatisfied:" in text
    assert "count: 40" in text
    assert "gender: " in text
    t_line = [l for l in text.splitlines() if l.startswith("welch_t")][0]
    p = float(t_line.split("p=")[1])
    assert p < 0.05
    assert any(l.startswith("chi_square") for l in text.splitlines())


def test_stats_identical_classes_p_near_one(tmp_path, rng):
    durs = [float(d) for d in rng.uniform(5.0, 50.0, 30)]
    rows = []
    for cls in ("a", "b"):
        for i, d in enumerate(durs):
            rows.append(ManifestRow("%s/%d.wav" % (cls, i), cls, "s%d" % i,
                                    "m" if i % 2 else "f", d))
    manifest = tmp_path / "same.csv"
    write_manifest(manifest, rows)
    out = tmp_path / "same.txt"
    assert main(["stats", "--manifest", str(manifest), "--out", str(out)]) == 0
    text = out.read_text()
    t_line = [l for l in text.splitlines() if l.startswith("welch_t")][0]
    chi_line = [l for l in text.splitlines() if l.startswith("chi_square")][0]
    assert float(t_line.split("p=")[1]) == pytest.approx(1.0, abs=1e-9)
    assert float(chi_line.split("p=")[1]) == pytest.approx(1.0, abs=1e-9)


def test_stats_single_class_skips_tests(tmp_path):
    rows = [ManifestRow("x/%d.wav" % i, "only", "s%d" % i, "m", 10.0 + i)
            for i in range(5)]
    manifest = tmp_path / "one.csv"
    write_manifest(manifest, rows)
    out = tmp_path / "one.txt"
    assert main(["stats", "--manifest", str(manifest), "--out", str(out)]) == 0
    text = out.read_text()
    assert "tests skipped: only one class" in text
    assert "welch_t" not in text


def test_stats_counts_echo_manifest(tmp_path, rng):
    manifest = tmp_path / "stats.csv"
    rows = make_stats_manifest(manifest, rng)
    out = tmp_path / "echo.txt"
    main(["stats", "--manifest", str(manifest), "--out", str(out)])
    text = out.read_text()
    assert "rows: %d" % len(rows) in text
