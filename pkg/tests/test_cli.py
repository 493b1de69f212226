import json
import os

import pytest

import src.main as cli
from src.errors import InvariantViolation


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_infer_expression(capsys):
    code, out, _ = run(capsys, "infer", "-e", "id ~id")
    assert code == 0
    assert out.strip() == "forall a. a -> a"


def test_infer_residual_annotation(capsys):
    code, out, _ = run(capsys, "infer", "-e", "let x = id id in x")
    assert code == 0
    assert out.strip() == "_1 -> _1  where _1 is monomorphic"


def test_type_error_exit_code(capsys):
    code, out, err = run(capsys, "infer", "-e", "~id 3")
    assert code == 1
    assert out == ""
    assert "type error" in err


def test_parse_error_exit_code(capsys):
    code, _, err = run(capsys, "infer", "-e", "fun -> x")
    assert code == 2
    assert "parse error" in err


def test_missing_input(capsys):
    code, _, _ = run(capsys, "infer")
    assert code == 2


def test_missing_prelude(capsys, tmp_path):
    code, _, _ = run(capsys, "infer", "--prelude", str(tmp_path / "none.fml"), "-e", "id")
    assert code == 2


def test_infer_file(capsys, tmp_path):
    source = tmp_path / "pair.fml"
    source.write_text("pair 1 unit\n", encoding="utf-8")
    code, out, _ = run(capsys, "infer", str(source))
    assert code == 0
    assert out.strip() == "(Int, Unit)"


def test_json_report(capsys):
    code, out, _ = run(capsys, "infer", "--json", "-e", "fun x -> x")
    assert code == 0
    report = json.loads(out)
    assert report["status"] == "ok"
    assert report["type"] == "_1 -> _1  where _1 is monomorphic"
    assert report["residuals"] == [{"name": "_1", "restriction": "mono"}]
    assert report["error"] is None


def test_json_type_error(capsys):
    code, out, _ = run(capsys, "infer", "--json", "-e", "poly id")
    assert code == 1
    report = json.loads(out)
    assert report["status"] == "type-error"
    assert report["error"]["kind"] == "UnificationFailure"


def test_json_parse_error_has_position(capsys):
    code, out, _ = run(capsys, "infer", "--json", "-e", "fun x ->")
    assert code == 2
    report = json.loads(out)
    assert report["status"] == "parse-error"
    assert report["error"]["line"] == 1


def test_trace_output(capsys):
    code, out, _ = run(capsys, "infer", "--trace", "-e", "id 3")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "Int"
    assert lines[1].startswith("step=0 rule=init")
    assert all(line.startswith("step=") for line in lines[1:])


def test_json_trace(capsys):
    code, out, _ = run(capsys, "infer", "--json", "--trace", "-e", "id 3")
    report = json.loads(out)
    assert code == 0
    assert report["trace"][0]["rule"] == "init"
    assert [r["step"] for r in report["trace"]] == list(range(len(report["trace"])))


def test_constraint_dump(capsys):
    code, out, _ = run(capsys, "infer", "--constraint", "-e", "id 3")
    assert code == 0
    first, last = out.splitlines()[0], out.splitlines()[-1]
    assert first.startswith("(exists")
    assert last == "Int"


def test_internal_error_exit_code(capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise InvariantViolation("measure did not decrease")

    monkeypatch.setattr(cli, "infer", broken)
    code, _, err = run(capsys, "infer", "-e", "id")
    assert code == 3
    assert "internal error" in err


def test_selftest_zero_count(capsys):
    code, out, _ = run(capsys, "selftest", "--count", "0")
    assert code == 0
    assert "✅" in out


def test_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["typecheck"])


SAMPLES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "samples")


@pytest.mark.parametrize("name,code,expected", [
    ("id_frozen.fml", 0, "forall a. a -> a"),
    ("value_restriction.fml", 0, "_1 -> _1  where _1 is monomorphic"),
    ("single_choose.fml", 0, "Unit -> List (forall a. a -> a -> a)"),
    ("annotated_let.fml", 0, "(Int, (Int, Bool))"),
    ("frozen_applied.fml", 1, ""),
])
def test_samples(capsys, name, code, expected):
    status, out, _ = run(capsys, "infer", os.path.join(SAMPLES, name))
    assert status == code
    assert out.strip() == expected


def test_recursion_limit_is_internal_error(capsys, monkeypatch):
    def too_deep(*args, **kwargs):
        raise RecursionError("maximum recursion depth exceeded")

    monkeypatch.setattr(cli, "infer", too_deep)
    code, out, err = run(capsys, "infer", "-e", "id ~id")
    assert code == 3
    assert out == ""
    assert "internal error" in err


def test_recursion_limit_json_report(capsys, monkeypatch):
    def too_deep(*args, **kwargs):
        raise RecursionError("maximum recursion depth exceeded")

    monkeypatch.setattr(cli, "infer", too_deep)
    code, out, _ = run(capsys, "infer", "--json", "-e", "id ~id")
    assert code == 3
    assert json.loads(out)["status"] == "internal-error"


@pytest.mark.parametrize("depth", [300, 3000])
def test_deeply_nested_term_exits_cleanly(capsys, depth):
    code, _, _ = run(capsys, "infer", "-e", "fun x -> " * depth + "x")
    assert code in (0, 2, 3)
