import subprocess
import sys

import numpy as np
import pytest

from gencs.cli import main
from gencs.coherence import load_coherence
from gencs.experiment import load_vectors, read_results
from gencs.generative import load_net
from gencs.sampling import load_plan, load_probabilities, uniform


@pytest.fixture
def net_file(tmp_path):
    path = tmp_path / "net.npz"
    assert main(["gen-net", "--widths", "2,6,32", "--seed", "1", "--signals", "2",
                 "--signal-output", str(tmp_path / "x.txt"), "-o", str(path)]) == 0
    return path


def test_gen_net_writes_net_and_signals(net_file, tmp_path):
    net = load_net(net_file)
    assert net.widths == (2, 6, 32)
    assert load_vectors(tmp_path / "x.txt").shape == (2, 32)


def test_pipeline_end_to_end(net_file, tmp_path, capsys):
    t = str(tmp_path)
    assert main(["coherence", "--net", str(net_file), "--method", "exact", "-o", f"{t}/a.csv"]) == 0
    assert load_coherence(f"{t}/a.csv").alpha.size == 32
    assert main(["sample", "--n", "32", "--m", "24", "--scheme", "adapted", "--coherence", f"{t}/a.csv",
                 "--seed", "3", "--p-output", f"{t}/p.csv", "-o", f"{t}/plan.csv"]) == 0
    p = load_probabilities(f"{t}/p.csv")
    assert load_plan(f"{t}/plan.csv", p).m == 24
    assert main(["measure", "--net", str(net_file), "--plan", f"{t}/plan.csv", "--probabilities", f"{t}/p.csv",
                 "--latent-seed", "5", "--signal-output", f"{t}/x0.txt", "-o", f"{t}/b.csv"]) == 0
    assert main(["recover", "--net", str(net_file), "--measurements", f"{t}/b.csv", "--probabilities",
                 f"{t}/p.csv", "--preconditioned", "--iterations", "4000", "--signal", f"{t}/x0.txt",
                 "-o", f"{t}/xhat.txt"]) == 0
    out = capsys.readouterr().out
    assert "rre" in out
    x0, xh = load_vectors(f"{t}/x0.txt")[0], load_vectors(f"{t}/xhat.txt")[0]
    assert np.linalg.norm(x0 - xh) <= 3e-3 * np.linalg.norm(x0)


def test_sample_uniform_and_custom(tmp_path):
    assert main(["sample", "--n", "8", "--m", "5", "-o", str(tmp_path / "u.csv")]) == 0
    assert load_plan(tmp_path / "u.csv", uniform(8)).m == 5
    (tmp_path / "p.csv").write_text("index,p\n1,0.5\n2,0.5\n")
    for spec in (str(tmp_path / "p.csv"), f"custom:{tmp_path / 'p.csv'}"):
        assert main(["sample", "--n", "2", "--m", "3", "--p", spec, "-o", str(tmp_path / "c.csv")]) == 0


@pytest.mark.parametrize("argv", [
    [],
    ["sample", "--n", "8"],
    ["sample", "--n", "0", "--m", "3", "-o", "x"],
    ["gen-net", "--widths", "2,x", "-o", "x"],
    ["frobnicate"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1


def test_config_and_file_errors_exit_1(tmp_path, net_file):
    (tmp_path / "bad.cfg").write_text("trials = 4\ntrials = 5\n")
    assert main(["experiment", "--config", str(tmp_path / "bad.cfg")]) == 1
    assert main(["experiment", "--config", str(tmp_path / "missing.cfg")]) == 1
    (tmp_path / "p.csv").write_text("index,p\n1,0.5\n2,0.6\n")
    assert main(["sample", "--n", "2", "--m", "3", "--p", str(tmp_path / "p.csv"), "-o", "x"]) == 1
    assert main(["coherence", "--net", str(net_file), "--transform", "dft2d", "-o", "x"]) == 1


def test_corrupt_net_exit_1(tmp_path):
    (tmp_path / "net.npz").write_bytes(b"not an archive")
    assert main(["coherence", "--net", str(tmp_path / "net.npz"), "-o", str(tmp_path / "a.csv")]) == 1


def test_runtime_error_exit_2(tmp_path):
    # the output path is a directory: an OS failure, not a malformed input
    assert main(["sample", "--n", "4", "--m", "2", "-o", str(tmp_path)]) == 2


def test_verify_rip_pass_and_fail(net_file, tmp_path):
    base = ["verify", "rip", "--net", str(net_file), "--trials", "20", "--seed", "0"]
    assert main(base + ["--m", "200", "--report", str(tmp_path / "r.csv")]) == 0
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 21
    assert main(base + ["--m", "3"]) == 3


def test_verify_isotropy(capsys):
    assert main(["verify", "isotropy", "--n", "32", "--k", "3", "--samples", "20000"]) == 0
    assert "isotropy" in capsys.readouterr().out


def test_verify_end_to_end_failure_exit_3(net_file):
    assert main(["verify", "theorem1", "--net", str(net_file), "--C", "0.001", "--trials", "5",
                 "--iterations", "200", "--restarts", "1"]) == 3


def test_experiment_and_plot(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text("net.widths = 2, 6, 32\nm = 8, 32\ntrials = 2\nrecovery.iterations = 500\n"
                   "recovery.restarts = 1\ncoherence.batch = 50\n")
    out = tmp_path / "out"
    assert main(["experiment", "--config", str(cfg), "--output-dir", str(out), "--no-plots"]) == 0
    assert len(read_results(out / "results.csv")) == 8
    assert not (out / "rre.svg").exists()
    assert main(["plot", "--results", str(out / "results.csv"), "--coherence", str(out / "coherence.csv"),
                 "--output-dir", str(out)]) == 0
    assert all((out / f).exists() for f in ("rre.svg", "success.svg", "coherence.svg"))


def test_console_script_module_entry(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gencs.cli", "sample", "--n", "4", "--m", "2",
                          "-o", str(tmp_path / "plan.csv")], capture_output=True, text=True)
    assert out.returncode == 0
    out = subprocess.run([sys.executable, "-m", "gencs.cli", "sample"], capture_output=True, text=True)
    assert out.returncode == 1
