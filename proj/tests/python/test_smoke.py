import json
import math
import os
from pathlib import Path

import pytest

import darnwalk

DATA = Path(os.environ.get("DARNWALK_TEST_DATA", Path(__file__).resolve().parents[1])) / "data"
REF = str(DATA / "ref.json")


@pytest.fixture(scope="module")
def ref():
    return darnwalk.Config.from_file(REF)


def test_config_round_trip(ref):
    assert ref.shell_count == 2
    assert ref.dims == [2, 3]
    assert ref.weights == pytest.approx([0.4, 0.6])
    again = darnwalk.Config.from_json(ref.to_json())
    assert again.to_json() == ref.to_json()


def test_level_function_closed_forms(ref):
    # dim 2: log rho / log 2, dim 3: (1 - 1/rho) * 2
    assert darnwalk.radial_g(ref, 0, 1.5) == pytest.approx(math.log(1.5) / math.log(2.0), abs=1e-14)
    assert darnwalk.radial_g(ref, 1, 1.5) == pytest.approx(2.0 * (1.0 - 1.0 / 1.5), abs=1e-14)
    assert darnwalk.level_radius(ref, 0, 0.5) == pytest.approx(math.sqrt(2.0), abs=1e-14)


def test_exit_kernel_reproduces_weights(ref):
    k = darnwalk.exit_kernel(ref, 0.5, samples=20000, seed=7, threads=1)
    (m0, s0), (m1, s1) = k["shell 0"], k["shell 1"]
    assert abs(m0 - 0.4) < 4 * s0
    assert abs(m1 - 0.6) < 4 * s1
    assert darnwalk.exit_kernel(ref, 0.5, samples=2000, seed=7, threads=3) == darnwalk.exit_kernel(
        ref, 0.5, samples=2000, seed=7, threads=1
    )


def test_compatibility_and_exit_times(ref):
    rep = darnwalk.check_compatibility(ref, [0.4, 0.6], [(0.25, 0.5)], samples=5000, seed=7)
    assert rep["pass"]
    (mean, se), = darnwalk.expected_exit_time(ref, 1, [5, 0, 0], 1.0, [[5, 0, 0]], samples=100, seed=7)
    assert mean == pytest.approx(1.0 / 3.0, abs=1e-15) and se == 0.0


def test_stability(ref):
    assert darnwalk.classify_stability(ref)["hole_count"] == 0
    nested = darnwalk.Config.from_file(str(DATA / "nested.json"))
    assert darnwalk.classify_stability(nested)["hole_count"] == 3


def test_errors(ref):
    with pytest.raises(darnwalk.DarnwalkError):
        darnwalk.Config.from_json('{"shells": []}')
    with pytest.raises(darnwalk.DarnwalkError):
        darnwalk.exit_kernel(ref, 1.5, samples=10)
    with pytest.raises(darnwalk.DarnwalkError):
        darnwalk.Config.from_file("/nonexistent.json")


def test_cli_in_process():
    code, out, err = darnwalk.run_cli(["gfun", "--config", REF, "--points", "3", "--seed", "1"])
    assert code == 0 and err == ""
    doc = json.loads(out)
    assert doc["seed"] == 1
    code, _, err = darnwalk.run_cli(["kernel", "--config", REF, "--t", "2"])
    assert code == 4
    assert json.loads(err)["error"] == "domain"
    assert darnwalk.sha256_hex("abc").startswith("ba7816bf")
