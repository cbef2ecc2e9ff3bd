import json

import numpy as np
import pytest

from selfsim import io
from selfsim.bimodule import CographFunction, PathFunction, PathSpace, SampledFunction
from selfsim.cli import main, pixel_centers, rasterize
from selfsim.cograph import CographSample
from selfsim.exceptions import InvalidInputError
from selfsim.ifs import SampleGrid
from selfsim.regions import Polytope

from conftest import system


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_render_csv_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["render", "cantor", "--depth", "6", "--out", str(a)]) == 0
    assert main(["render", "cantor", "--depth", "6", "--out", str(b)]) == 0
    lines = a.read_text().splitlines()
    assert len(lines) == 64
    assert a.read_bytes() == b.read_bytes()
    assert float(lines[0]) == 0.0


def test_render_chaos_game_csv(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["render", "gasket", "--iterations", "500", "--seed", "7", "--out", str(a)]) == 0
    assert main(["render", "gasket", "--iterations", "500", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 500


def test_render_ppm_gasket_inside_hull_triangle(tmp_path):
    out = tmp_path / "g.ppm"
    assert main(["render", "gasket", "--depth", "7", "--format", "ppm", "--out", str(out)]) == 0
    data = out.read_bytes()
    header = b"P6\n512 512\n255\n"
    assert data.startswith(header)
    img = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(512, 512, 3)
    mask = img[:, :, 0] == 0
    assert mask.any()
    s = system("gasket")
    xs, ys = pixel_centers(s, mask.shape)
    rows, cols = np.nonzero(mask)
    pts = np.c_[xs[cols], ys[rows]]
    pixel = 2 * s.hull_radius / 512
    tri = Polytope([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    assert tri.contains(pts, margin=-pixel).all()


def test_rasterize_one_dimensional_strip():
    s = system("cantor")
    mask = rasterize(s, SampleGrid(s, 4).points, 64)
    assert mask.shape == (8, 64)
    assert (mask == mask[0]).all()
    # the middle third is a gap
    assert not mask[0, 22:42].any()


def test_branch_exit_codes(tmp_path):
    code, payload = run(["branch", "tent"], tmp_path)
    assert code == 1
    assert payload["report"]["cardinality"] == "finite(1)"
    assert payload["schema_version"] == 1
    code, _ = run(["branch", "cantor"], tmp_path)
    assert code == 0
    code, payload = run(["branch", "carpet-modified", "--depth", "6"], tmp_path)
    assert code == 1
    assert payload["report"]["cardinality"] == "infinite-at-resolution"


def test_check_exit_codes(tmp_path):
    assert run(["check", "tent", "--condition", "osc"], tmp_path)[0] == 0
    code, payload = run(["check", "tent-modified", "--condition", "strong"], tmp_path)
    assert code == 1
    assert payload["report"]["witness"]["point"] == pytest.approx([0.5])
    assert run(["check", "tent-modified", "--condition", "graph"], tmp_path)[0] == 0


def test_check_osc_without_witness_is_undetermined(tmp_path):
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(system("tent").to_dict()))
    code, payload = run(["check", str(path), "--condition", "osc"], tmp_path)
    assert code == 3
    assert payload["report"]["status"] == "undetermined"
    wit = tmp_path / "wit.json"
    wit.write_text(json.dumps({"kind": "box", "lower": [0], "upper": [1]}))
    assert run(["check", str(path), "--condition", "osc", "--witness", str(wit)], tmp_path)[0] == 0


def test_classify_from_file(tmp_path):
    path = tmp_path / "sys.json"
    data = {"system": system("gasket").to_dict(),
            "witness": {"kind": "polytope", "vertices": [[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]]}}
    path.write_text(json.dumps(data))
    code, payload = run(["classify", str(path)], tmp_path)
    assert code == 0
    assert payload["report"]["verdict"]["label"] == "O_3"
    assert payload["command"] == "classify"


def test_classify_registry_echoes_metadata(tmp_path):
    code, payload = run(["classify", "carpet-modified", "--depth", "6"], tmp_path)
    assert code == 0
    assert payload["report"]["metadata"]["K0(C(B))"] == "Z^4"


def test_invalid_inputs_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["branch", str(bad)]) == 2
    improper = tmp_path / "improper.json"
    improper.write_text(json.dumps({"hull": {"center": [0], "radius": 1},
                                    "maps": [{"matrix": [[1.0]], "offset": [0]},
                                             {"matrix": [[0.5]], "offset": [0]}]}))
    assert main(["classify", str(improper)]) == 2
    assert main(["branch", "no-such-system"]) == 2
    assert main(["frobnicate"]) == 2


def test_verify_registry_suite(tmp_path):
    code, payload = run(["verify", "registry"], tmp_path)
    assert code == 0
    assert payload["report"]["passed"] is True


def test_verify_output_is_deterministic(tmp_path):
    a = run(["verify", "bimodule", "--seed", "3"], tmp_path, "a.json")
    b = run(["verify", "bimodule", "--seed", "3"], tmp_path, "b.json")
    assert a[0] == 0
    assert a == b


def test_json_roundtrip_of_functions(rng):
    s = system("tent")
    grid = SampleGrid(s, 3)
    a = SampledFunction(grid, lambda p: p[:, 0] + 1j)
    back = io.function_from_dict(json.loads(json.dumps(io.function_to_dict(a))), s)
    assert np.array_equal(back.values, a.values)
    f = CographFunction.from_callable(CographSample(s, grid), lambda x, y: x[:, 0] * y[:, 0])
    back = io.function_from_dict(io.function_to_dict(f), s)
    assert np.array_equal(back.values, f.values)
    p = PathFunction.constant(PathSpace(s, 2, grid), 2.0)
    back = io.function_from_dict(io.function_to_dict(p), s)
    assert np.array_equal(back.values, p.values)
    with pytest.raises(InvalidInputError):
        io.function_from_dict(io.function_to_dict(a), system("cantor"))


def test_dumps_is_sorted_and_versioned():
    text = io.dumps({"b": np.float64(1.5), "a": np.arange(2), "c": float("inf")})
    data = json.loads(text)
    assert list(data) == ["a", "b", "c", "schema_version"]
    assert data["c"] == "inf"


def test_read_json_rejects_future_schema(tmp_path):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(InvalidInputError):
        io.read_json(path)
