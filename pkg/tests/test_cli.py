import functools
import io
import json
from fractions import Fraction

import pytest

from sumsetlab import cli, density, families, lattice, morphology, setlang, verify
from sumsetlab.lattice import Window, build_set


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_density_example():
    code, out, _ = call("density", "--window", "1d:1048576", "--expr", "family(upper_pair).A")
    assert code == 0
    rows = dict(line.split(",") for line in out.splitlines()[1:])
    assert abs(Fraction(rows["lower"]) - Fraction(1, 2)) < Fraction(1, 50)
    assert abs(Fraction(rows["upper"]) - Fraction(2, 3)) < Fraction(1, 50)


def test_mann_exhaustive_example():
    code, out, _ = call("mann", "--exhaustive", "8")
    assert code == 0 and out == "0 violations / 65536 pairs\n"


def test_syntax_error_exits_2():
    code, out, err = call("eval", "--window", "1d:10", "--expr", "interval(2,")
    assert code == 2 and out == ""
    assert "column 11" in err


@pytest.mark.parametrize("argv", [
    ["density"],
    ["density", "--window", "2d:5", "--expr", "interval(1,2)"],
    ["density", "--window", "1d:10", "--expr", "family(nope)"],
    ["density", "--window", "1d:10", "--expr", "interval(1,2)", "--param", "x"],
    ["witness", "--window", "1d:20", "--expr", "interval(1,2)", "--m-max", "8"],
    ["search-m", "--window", "1d:20", "--expr", "interval(1,2)", "--mode", "banach-dilate"],
    ["nosuchcommand"],
    ["mann"],
])
def test_usage_errors_exit_2(argv):
    assert call(*argv)[0] == 2


def test_mann_failure_would_exit_1(monkeypatch):
    monkeypatch.setattr(verify, "mann_exhaustive", lambda n, threads=1: (3, 16))
    code, out, _ = call("mann", "--exhaustive", "2")
    assert code == 1 and out.startswith("3 violations")


def test_eval_cells():
    code, out, _ = call("eval", "--window", "c3:2", "--cells", "0:1;-3:3")
    assert code == 0
    assert set(lattice.loads(out).coords()) == {(0, 1), (-3, 3)}
    assert call("eval", "--window", "1d:5", "--cells", "9")[0] == 2


def test_eval_json(tmp_path):
    target = tmp_path / "s.txt"
    code, _, _ = call("eval", "--window", "1d:20", "--expr", "interval(2,5)", "--out", str(target))
    assert code == 0
    s = lattice.loads(target.read_text())
    assert s == build_set(Window.classical(20), [2, 3, 4, 5])
    code, out, _ = call("eval", "--window", "1d:20", "--expr", "ap(1,3,4)", "--format", "json")
    assert json.loads(out)["cardinality"] == 4


def test_transform_round_trip(tmp_path):
    a = tmp_path / "a.txt"
    call("eval", "--window", "1d:30", "--expr", "mod(3,{0})", "--out", str(a))
    code, out, _ = call("transform", "dilate", "--window", "1d:30", "--file", str(a), "--param", "r=1")
    assert code == 0
    assert lattice.loads(out) == setlang.evaluate("dilate(mod(3,{0}),1)", Window.classical(30))
    code, _, err = call("transform", "sum", "--window", "1d:30", "--file", str(a))
    assert code == 2 and "needs 2" in err


def test_cover_instance(tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"ground": [1, 2, 3, 4], "subsets": [[1, 2], [3, 4]],
                                "m": 1, "t": "1/2", "target": [1]}))
    code, out, _ = call("cover", "--instance", str(inst), "--format", "json")
    rec = json.loads(out)[0]
    assert code == 0 and rec["holds"] and rec["lhs"] == "1/4" and rec["rhs"] == "1/2"
    inst.write_text(json.dumps({"ground": [1, 2], "subsets": [[1]], "m": 1, "t": "1/2"}))
    code, _, err = call("cover", "--instance", str(inst))
    assert code == 2 and "uncovered" in err


def test_verify_example_prints_claims():
    code, out, _ = call("verify-example", "nonpws-12", "--quick")
    lines = out.strip().splitlines()
    assert lines and all(line.split()[0] in ("PASS", "FAIL") for line in lines)
    assert code == (1 if any(line.startswith("FAIL") for line in lines) else 0)


def test_reports_are_deterministic():
    argv = ["witness", "--window", "1d:4000", "--family", "upper_pair", "--sumset",
            "--m-max", "2", "--k-max", "2", "--format", "json"]
    one = call(*argv, "--threads", "1")[1]
    assert call(*argv, "--threads", "4")[1] == one
    assert call(*argv, "--threads", "4")[1] == one
    argv = ["cover", "--besicovitch", "20", "--seed", "9"]
    assert call(*argv)[1] == call(*argv)[1]


# every operation of the library is reached by at least one subcommand

SAMPLES = {
    "eval": ["eval", "--window", "1d:40", "--expr", "interval(2,5)"],
    "transform": None,
    "density": ["density", "--window", "1d:400", "--expr", "mod(2,{1})", "--param", "banach=10"],
    "witness": ["witness", "--window", "1d:400", "--expr", "mod(2,{1})", "--m-max", "1", "--k-max", "1"],
    "search-m": None,
    "gap-check": ["gap-check", "--window", "1d:400", "--expr", "mod(2,{1})", "--param", "m_f=2"],
    "mann": None,
    "cover": None,
    "two-scale": None,
    "family": None,
}

TRANSFORM_OPS = {
    "lattice.boolean_op": "union", "lattice.translate": "translate", "morphology.sumset": "sum",
    "morphology.dilate_cube": "dilate", "morphology.erode_cube": "erode",
    "morphology.block_quotient": "quotient", "morphology.block_fill": "fill",
}


def sample_argv(op, command, tmp_path):
    if command == "transform":
        return ["transform", TRANSFORM_OPS[op], "--window", "1d:40",
                "--expr", "mod(3,{0})", "--expr", "interval(1,4)"]
    if command == "search-m":
        if op == "density.saturation_search":
            return ["search-m", "--window", "1d:400", "--expr", "mod(2,{1})",
                    "--mode", "banach-dilate", "--epsilon", "1/10", "--param", "n=20"]
        return ["search-m", "--window", "1d:400", "--expr", "mod(2,{1})", "--level", "1/2", "--k-max", "1"]
    if command == "mann":
        if op == "verify.mann_exhaustive":
            return ["mann", "--exhaustive", "3"]
        return ["mann", "--window", "1d:30", "--expr", "mod(2,{1})", "--expr", "mod(3,{1})"]
    if command == "cover":
        if op == "verify.besicovitch_select":
            return ["cover", "--besicovitch", "2"]
        inst = tmp_path / "inst.json"
        inst.write_text(json.dumps({"ground": [1, 2], "subsets": [[1, 2]], "m": 1, "t": "1/2", "target": [1]}))
        return ["cover", "--instance", str(inst)]
    if command == "two-scale":
        base = ["two-scale", "--window", "c400:1", "--param", "nu=20", "--param", "s=1"]
        if op == "verify.syndetic_point_fraction":
            return [
                "two-scale", "--window", "1d:400", "--param", "nu=20", "--param", "s=1",
                "--expr", "mod(2,{1})", "--expr", "mod(2,{0})", "--syndetic", "--m-max", "2"]
        return base
    if command == "family":
        name = op.split(".")[1][4:]
        argv = ["family", "--window", "1d:300", "--family", name]
        if name == "big_pair":
            argv = ["family", "--window", f"1d:{3**12}", "--family", name, "--param", "base=3"]
        return argv
    if op == "lattice.build_set":
        return ["eval", "--window", "1d:40", "--cells", "2,3,5"]
    return SAMPLES[command]


def test_operation_table_names_real_functions():
    mods = {"lattice": lattice, "morphology": morphology, "density": density,
            "families": families, "verify": verify, "setlang": setlang}
    for op, command in cli.OPERATION_COMMANDS.items():
        mod, name = op.split(".")
        assert callable(getattr(mods[mod], name)), op
        assert command in cli.COMMANDS


EVERY_OPERATION = [
    "lattice.build_set", "lattice.boolean_op", "lattice.translate",
    "morphology.sumset", "morphology.dilate_cube", "morphology.erode_cube",
    "morphology.block_quotient", "morphology.block_fill",
    "density.prefix_profile", "density.tail_estimates", "density.schnirelmann",
    "density.banach_profile", "density.witness_table", "density.minimal_m_search",
    "density.saturation_search", "density.adaptive_gap_check",
    "families.gen_upper_pair", "families.gen_epsilon_set", "families.gen_optimal_C",
    "families.gen_big_pair", "families.gen_non_pws",
    "verify.mann_sigma_sum", "verify.mann_check", "verify.mann_exhaustive",
    "verify.covering_bound_check", "verify.besicovitch_select",
    "verify.two_scale_density_fraction", "verify.syndetic_point_fraction",
    "setlang.parse", "setlang.evaluate",
]


@pytest.mark.parametrize("op", EVERY_OPERATION)
def test_operation_is_reachable(op, monkeypatch, tmp_path):
    assert op in cli.OPERATION_COMMANDS
    mods = {"lattice": lattice, "morphology": morphology, "density": density,
            "families": families, "verify": verify, "setlang": setlang}
    mod_name, name = op.split(".")
    mod = mods[mod_name]
    original = getattr(mod, name)
    calls = []

    @functools.wraps(original)
    def spy(*a, **kw):
        calls.append(1)
        return original(*a, **kw)

    # patch every module that imported the name directly as well
    for m in mods.values():
        if getattr(m, name, None) is original:
            monkeypatch.setattr(m, name, spy)
    code, _, err = call(*sample_argv(op, cli.OPERATION_COMMANDS[op], tmp_path))
    assert code in (0, 1), err
    assert calls, f"{op} not reached by {cli.OPERATION_COMMANDS[op]}"
