"""Unit tests for the command-line interface."""

import json
import struct
from unittest.mock import patch

import numpy as np
import pytest

from pi_quant.cli import EXIT_ACCEPTANCE, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from pi_quant.containers import encode_quantized, read_dense, write_dense
from pi_quant.packing import pack_codes, packed_bit_length
from pi_quant.rotation_codec import precision_config
from pi_quant.tensor_quant import quantize_tensor


def _table(text):
    lines = text.strip().splitlines()
    return lines[0], lines[1], lines[2:]


def test_quantize_and_dequantize_files(tmp_path, rng, capsys):
    """Test a dense file goes through quantize and dequantize within the reported bound."""
    source = tmp_path / "weights.pqtd"
    packed = tmp_path / "weights.piqt"
    restored = tmp_path / "restored.pqtd"
    tensor = rng.standard_normal((10, 7))
    write_dense(source, tensor)

    assert main(["quantize", str(source), str(packed), "--lambda", "3"]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["schema"] == "pi_quant.quantize_summary/1"
    assert summary["elements"] == 70
    assert summary["bits_per_param"] == pytest.approx(10.0)

    assert main(["dequantize", str(packed), str(restored)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["elements"] == 70
    result = read_dense(restored)
    assert result.shape == (10, 7)
    assert np.max(np.abs(result - tensor)) <= summary["max_err_bound"] + 1e-12


def test_byte_packing_flag(tmp_path, capsys):
    """Test byte packing reports whole bytes per code."""
    source = tmp_path / "t.pqtd"
    write_dense(source, np.arange(1.0, 9.0))
    assert main(["quantize", str(source), str(tmp_path / "t.piqt"), "--pack", "byte", "--lambda", "2"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["bits_per_param"] == 8.0


def test_quantize_packs_codes_once(tmp_path, capsys):
    """Test the storage figure is computed without packing the codes a second time."""
    source = tmp_path / "t.pqtd"
    write_dense(source, np.arange(1.0, 40.0))
    with patch("pi_quant.containers.pack_codes", wraps=pack_codes) as packer:
        assert main(["quantize", str(source), str(tmp_path / "t.piqt"), "--lambda", "1"]) == EXIT_OK
    packer.assert_called_once()
    expected = packed_bit_length(20, 1) / 39
    assert json.loads(capsys.readouterr().out)["bits_per_param"] == pytest.approx(expected)


def test_empty_tensor_files(tmp_path, capsys):
    """Test the empty tensor roundtrips through both commands."""
    source = tmp_path / "empty.pqtd"
    write_dense(source, np.zeros(0))
    assert main(["quantize", str(source), str(tmp_path / "empty.piqt")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["bits_per_param"] == 0.0
    assert main(["dequantize", str(tmp_path / "empty.piqt"), str(tmp_path / "back.pqtd")]) == EXIT_OK
    assert read_dense(tmp_path / "back.pqtd").shape == (0,)


def test_truncated_input_exits_2_without_output(tmp_path):
    """Test a truncated container is rejected and nothing is written."""
    data = encode_quantized(quantize_tensor(np.arange(6.0), precision_config(2)))
    broken = tmp_path / "broken.piqt"
    broken.write_bytes(data[:-3])
    target = tmp_path / "out.pqtd"
    assert main(["dequantize", str(broken), str(target)]) == EXIT_USAGE
    assert not target.exists()


def test_missing_input_exits_1(tmp_path):
    """Test a missing input file is an I/O error."""
    assert main(["dequantize", str(tmp_path / "nope.piqt"), str(tmp_path / "out.pqtd")]) == EXIT_IO


def test_missing_output_directory_exits_1(tmp_path):
    """Test an output path in a missing directory is an I/O error."""
    source = tmp_path / "t.pqtd"
    write_dense(source, np.ones(2))
    assert main(["quantize", str(source), str(tmp_path / "missing" / "t.piqt")]) == EXIT_IO


def test_full_disk_exits_1(tmp_path):
    """Test a failing write surfaces as an I/O error."""
    source = tmp_path / "t.pqtd"
    write_dense(source, np.ones(4))
    with patch("pi_quant.cli.write_quantized", side_effect=OSError("disk full")) as writer:
        assert main(["quantize", str(source), str(tmp_path / "t.piqt")]) == EXIT_IO
    writer.assert_called_once()


def test_dense_input_with_huge_shape_exits_2(tmp_path):
    """Test a dense header claiming more elements than the file holds is rejected."""
    source = tmp_path / "huge.pqtd"
    source.write_bytes(struct.pack("<4sBBB", b"PQTD", 1, 0, 2) + struct.pack("<2Q", 2**40, 2**40))
    target = tmp_path / "huge.piqt"
    assert main(["quantize", str(source), str(target)]) == EXIT_USAGE
    assert not target.exists()


@pytest.mark.parametrize("argv", [
    ["stats", "--dist", "cauchy"],
    ["stats", "--lambda-list", "1,x"],
    ["grid", "--lambda", "9"],
    ["himmelblau", "--start", "1"],
    ["frobnicate"],
    [],
])
def test_bad_flags_exit_2(argv):
    """Test malformed arguments exit with the usage code."""
    assert main(argv) == EXIT_USAGE


def test_help_exits_0(capsys):
    """Test --help prints usage and succeeds."""
    assert main(["--help"]) == EXIT_OK
    assert "quantize" in capsys.readouterr().out


def test_stats_table(capsys):
    """Test stats prints one CSV row per lambda and passes the bound."""
    assert main(["stats", "--n", "20000", "--lambda-list", "1,2,3,4"]) == EXIT_OK
    captured = capsys.readouterr()
    schema, header, rows = _table(captured.out)
    assert schema == "# schema: pi_quant.stats/1"
    assert header == "lambda,dist,n,mean_x,mean_y,max,bound,bound_grid"
    assert [row.split(",")[0] for row in rows] == ["1", "2", "3", "4"]
    assert captured.err.count("PASS") == 4


def test_stats_failure_exits_3(capsys):
    """Test a violated bound still prints the table and exits with the acceptance code."""
    assert main(["stats", "--n", "1000", "--lambda-list", "2", "--slack", "1e-9"]) == EXIT_ACCEPTANCE
    captured = capsys.readouterr()
    assert len(_table(captured.out)[2]) == 1
    assert "FAIL" in captured.err


def test_stats_json_carries_slope(capsys):
    """Test JSON output has the schema, columns and the fitted slope."""
    assert main(["stats", "--n", "5000", "--lambda-list", "1,2", "--format", "json"]) == EXIT_OK
    document = json.loads(capsys.readouterr().out)
    assert document["schema"] == "pi_quant.stats/1"
    assert document["columns"][0] == "lambda"
    assert len(document["rows"]) == 2
    assert document["slope"] < 0


def test_stats_to_file(tmp_path, capsys):
    """Test --out writes the table to a file instead of stdout."""
    target = tmp_path / "stats.csv"
    assert main(["stats", "--n", "1000", "--lambda-list", "1", "--out", str(target)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert target.read_text().startswith("# schema: pi_quant.stats/1\n")


def test_grid_table(capsys):
    """Test grid emits one row per cell."""
    assert main(["grid", "--lambda", "1", "--res", "16", "--subsamples", "1"]) == EXIT_OK
    schema, header, rows = _table(capsys.readouterr().out)
    assert header == "cell_x,cell_y,mean_err,density"
    assert len(rows) == 256


def test_ablation_json(capsys):
    """Test ablation emits six variant rows."""
    assert main(["ablation", "--n", "1000", "--format", "json"]) == EXIT_OK
    document = json.loads(capsys.readouterr().out)
    assert document["schema"] == "pi_quant.ablation/1"
    assert document["lambda"] == 3
    assert len(document["rows"]) == 6


def test_trajectory_table(capsys):
    """Test trajectory emits the requested number of samples starting at (2, 0)."""
    assert main(["trajectory", "--lambda", "1", "--n", "100"]) == EXIT_OK
    _, header, rows = _table(capsys.readouterr().out)
    assert header == "theta,x,y"
    assert len(rows) == 100
    assert rows[0] == "0.0,2.0,0.0"


def test_himmelblau_from_minimum(capsys):
    """Test a descent started at (3, 2) stays at f = 0."""
    assert main(["himmelblau", "--optimizer", "adam", "--start", "3,2", "--steps", "10"]) == EXIT_OK
    _, header, rows = _table(capsys.readouterr().out)
    assert header == "step,x,y,f,optimizer,start_id"
    assert len(rows) == 11
    assert rows[-1].split(",")[3] == "0.0"


def test_himmelblau_default_starts(capsys):
    """Test the four default starts are numbered 0 to 3."""
    assert main(["himmelblau", "--steps", "2"]) == EXIT_OK
    _, _, rows = _table(capsys.readouterr().out)
    assert sorted({row.split(",")[5] for row in rows}) == ["0", "1", "2", "3"]


def test_train_toy_table(capsys):
    """Test one row per epoch plus the initial loss, per seed."""
    argv = ["train-toy", "--optimizer", "sgd", "--lr", "0", "--epochs", "2", "--runs", "2", "--seed", "5"]
    assert main(argv) == EXIT_OK
    _, header, rows = _table(capsys.readouterr().out)
    assert header == "epoch,loss,optimizer,lambda,seed"
    assert len(rows) == 6
    assert {row.split(",")[4] for row in rows} == {"5", "6"}


def test_train_toy_rejects_zero_runs():
    """Test --runs 0 exits with the usage code."""
    assert main(["train-toy", "--runs", "0", "--epochs", "1"]) == EXIT_USAGE
