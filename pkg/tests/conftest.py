import hypothesis
import numpy as np
import pytest

from loadcluster import bench, clustering, features, io, rpca, similarity

np.seterr(all="warn", under="ignore")

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("ci")

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.failed:
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE.items()):
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(c) for c in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def csv_writer(tmp_path):
    def _write(header, rows, name="loads.csv"):
        return write_csv(tmp_path / name, header, rows)

    return _write


def run_planted(spec: bench.SyntheticSpec, k_range=range(2, 9)):
    """Full in-memory pipeline on a synthetic draw."""
    raw, planted = bench.generate(spec)
    nm = io.normalize(raw)
    d = rpca.rpca_decompose(nm.values)
    z = features.feature_matrix(d.low_rank, d.sparse, nm.timestamps, nm.area_ids)
    g = similarity.build_graph(z)
    sweep = clustering.sweep_k(g.similarities, z, None, k_range)
    return {"planted": planted, "z": features.stack(z), "graph": g, "sweep": sweep,
            "decomposition": d}


@pytest.fixture(scope="session")
def planted_default():
    return run_planted(bench.SyntheticSpec())


@pytest.fixture(scope="session")
def small_synth_csv(tmp_path_factory):
    """Two archetypes x three areas, one hourly year."""
    root = tmp_path_factory.mktemp("synth")
    lm, labels = bench.generate(bench.SyntheticSpec(n_patterns=2, areas_per_pattern=3, seed=3))
    path = root / "loads.csv"
    io.write_profiles(lm, path)
    return path
