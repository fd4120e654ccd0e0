import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinlattice.cli import main
from thinlattice.config import DEFAULTS, ConfigError, parse_config, parse_number

from configs import FAST



def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_number():
    assert parse_number("1/12") == pytest.approx(1 / 12)
    assert parse_number("pi*sqrt(5/2)") == pytest.approx(math.pi * math.sqrt(2.5))
    assert parse_number("-2e-3") == -2e-3
    for bad in ("__import__('os')", "exp(1)", "1/", "a.b"):
        with pytest.raises(ValueError):
            parse_number(bad)


def test_unknown_key_and_section_report_line_numbers():
    text = "[run]\ncommand = bands\noutput = x\n\n[bands]\nn_per_axes = 9\n[nope]\na = 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    msg = "\n".join(info.value.problems)
    assert "line 6" in msg and "n_per_axes" in msg
    assert "line 7" in msg and "[nope]" in msg


def test_invalid_values_are_collected():
    text = "[run]\ncommand = dance\noutput = x\n[bands]\nn_per_axis = 4\n[floquet]\nk = 3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert len(info.value.problems) == 3


def test_empty_config_lists_required_fields(tmp_path, capsys):
    assert main(["--config", write(tmp_path, "")]) == 2
    err = capsys.readouterr().err
    assert "run.command" in err and "run.output" in err


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.ini")]) == 2


floats = st.floats(1e-3, 1e3, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(floats, st.lists(floats, min_size=2, max_size=4), st.integers(0, 2**31 - 1), st.booleans())
def test_config_round_trip(R, spacings, seed, mtx):
    cfg = parse_config("[run]\ncommand = nearfield\noutput = o\n", validate=False)
    cfg.values["nearfield"]["R"] = R
    cfg.values["nearfield"]["spacings"] = spacings
    cfg.values["run"]["seed"] = seed
    cfg.values["run"]["write_mtx"] = mtx
    again = parse_config(cfg.to_ini())
    assert again.to_dict() == cfg.to_dict()
    assert again.digest() == cfg.digest()


def test_every_default_survives_round_trip():
    cfg = parse_config("[run]\ncommand = all\noutput = o\n")
    assert parse_config(cfg.to_ini()).to_dict() == cfg.to_dict()
    assert set(cfg.to_dict()) == set(DEFAULTS)


def test_overrides(tmp_path):
    cfg = parse_config("[run]\ncommand = bands\noutput = o\n")
    cfg.apply_overrides(["bands.r_m=0.08", "bands.n_per_axis = 17"])
    assert cfg["bands.r_m"] == 0.08 and cfg["bands.n_per_axis"] == 17
    with pytest.raises(ConfigError):
        cfg.apply_overrides(["bands.unknown=1", "novalue"])


def test_friedrichs_manifest_kappa(tmp_path):
    cfg = write(tmp_path, "[run]\ncommand = friedrichs\n[friedrichs]\na = pi*sqrt(5/2)\nn_samples = 500\n")
    out = tmp_path / "fr"
    assert main(["--config", cfg, "--output", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    kappa = list(manifest["headline"]["kappa"].values())[0]
    assert kappa > 4.9348
    assert manifest["status"] == "ok" and "friedrichs.csv" in manifest["artifacts"]
    checks = json.loads((out / "friedrichs.json").read_text())["inequality_checks"]
    assert all(c["violations"] == 0 for c in checks)


def test_bands_with_reference_matrix(tmp_path):
    cfg = write(tmp_path, "[run]\ncommand = bands\n")
    out = tmp_path / "b"
    rc = main(["--config", cfg, "--output", str(out),
               "--override", "bands.r_m=0.08", "--override", "bands.t_m=-0.44",
               "--override", "bands.t_perp_m=-0.06"])
    assert rc == 0
    lo, hi = json.loads((out / "manifest.json").read_text())["headline"]["aleph"]
    assert abs(lo + 1.24) <= 0.10 and abs(hi - 1.04) <= 0.10
    assert (out / "band_path.csv").exists() and (out / "plot_bands.py").exists()


def test_partial_band_coefficients_fail_with_marker(tmp_path):
    cfg = write(tmp_path, "[run]\ncommand = bands\n[bands]\nr_m = 0.1\n")
    out = tmp_path / "f"
    assert main(["--config", cfg, "--output", str(out)]) == 1
    assert (out / "FAILED").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed" and "t_m" in manifest["error"]
    assert (out / "config.ini").exists()  # partial artifacts are kept


def test_all_pipeline_is_deterministic(tmp_path):
    cfg = write(tmp_path, FAST)
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert main(["--config", cfg, "--output", str(o)]) == 0
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        if name == "run.log":
            continue
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert manifest["stages"] == ["nearfield", "mixed", "scattering", "bands", "friedrichs", "floquet"]
    head = manifest["headline"]
    for key in ("mu1", "r", "t", "t_perp", "r_m", "t_m", "t_perp_m", "aleph", "kappa"):
        assert key in head
    bands = json.loads((outs[0] / "bands.json").read_text())
    # K, beta1 and mu1 flow from the nearfield stage into the first-band model
    assert bands["M_source"] == "scattering" and bands["first_band"]["mu1"] == head["mu1"]
    assert "pipeline_constants" in json.loads((outs[0] / "floquet_report.json").read_text())
