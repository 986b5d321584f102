from __future__ import annotations

import pytest

from src.errors import ConfigurationError
from src.geometry.models import MotionKind
from src.scenario import (
    CheckName,
    OdeMethod,
    ProbeName,
    ScenarioConfig,
    parse_config,
    parse_text,
    render_config,
)


def test_defaults():
    config = parse_text("")
    assert config == ScenarioConfig()
    assert config.dim == 1 and config.p == 3.0
    assert config.basis.N == 8
    assert config.quad_order == 16
    assert config.diagnostics.checks == list(CheckName)
    assert config.diagnostics.probes == list(ProbeName)
    assert config.diagnostics.seed is None


def test_quad_order_floor_and_override():
    assert parse_text("basis.N = 2").quad_order == 8
    assert parse_text("basis.N = 2\nquad.order = 5").quad_order == 5


def test_dual_exponent():
    assert parse_text("p = 3").dual_exponent == pytest.approx(1.5)
    assert parse_text("p = 2").dual_exponent == pytest.approx(2.0)


def test_values_and_comments():
    config = parse_text("""
        # a dilating interval
        motion.kind = dilation   # a sin(omega t)
        motion.a = 0.25
        ode.method = implicit_midpoint
        problem.u0.kind = bump
        problem.u0.center = 0.4
        diagnostics.probe_exponents = 2.5, 5
        refine.quadrature_check = false
    """)
    assert config.motion.kind == MotionKind.DILATION
    assert config.motion.a == 0.25
    assert config.ode.method == OdeMethod.IMPLICIT_MIDPOINT
    assert config.problem.u0.center == [0.4]
    assert config.diagnostics.probe_exponents == [2.5, 5.0]
    assert config.refine.quadrature_check is False


def test_exponent_below_two():
    with pytest.raises(ConfigurationError, match="p must be ≥ 2"):
        parse_text("p = 1.5")


def test_unknown_key_names_the_line():
    with pytest.raises(ConfigurationError, match=r"unknown configuration key 'motoin.kind' \(<config>:2\)"):
        parse_text("p = 3\nmotoin.kind = static\n")


@pytest.mark.parametrize("key", ["motion", "motion.kind.x", "basis..N", "problem.u0"])
def test_block_names_are_not_keys(key):
    with pytest.raises(ConfigurationError, match="unknown configuration key"):
        parse_text(f"{key} = 1")


def test_duplicate_key():
    with pytest.raises(ConfigurationError, match="duplicate configuration key 'basis.N'"):
        parse_text("basis.N = 4\nbasis.N = 8")


def test_missing_equals():
    with pytest.raises(ConfigurationError, match="expected 'key = value'"):
        parse_text("basis.N 4")


def test_bad_type_names_the_field():
    with pytest.raises(ConfigurationError, match="invalid basis.N"):
        parse_text("basis.N = many")


def test_bad_enum_names_the_field():
    with pytest.raises(ConfigurationError, match="invalid motion.kind"):
        parse_text("motion.kind = wobble")


def test_vector_lengths_follow_dim():
    with pytest.raises(ConfigurationError, match="motion.c must have dim = 2 entries"):
        parse_text("dim = 2\nmotion.kind = translation\nmotion.c = 0.1")
    assert parse_text("dim = 2\nmotion.c = 0.1, 0.2").motion_family().c == (0.1, 0.2)


def test_list_validation():
    with pytest.raises(ConfigurationError, match="invalid refine.N"):
        parse_text("refine.N = 16")
    with pytest.raises(ConfigurationError, match="nondecreasing"):
        parse_text("refine.N = 16, 8")
    with pytest.raises(ConfigurationError, match="decreasing"):
        parse_text("stability.deltas = 1e-4, 1e-2")
    with pytest.raises(ConfigurationError, match="probe exponent"):
        parse_text("diagnostics.probe_exponents = 1.5, 3")
    assert parse_text("refine.N = 4, 4, 8").refine.N == [4, 4, 8]


def test_seed_range():
    assert parse_text(f"diagnostics.seed = {2**64 - 1}").diagnostics.seed == 2**64 - 1
    with pytest.raises(ConfigurationError, match="invalid diagnostics.seed"):
        parse_text(f"diagnostics.seed = {2**64}")


def test_rendered_config_parses_back():
    config = parse_text("""
        dim = 2
        T = 0.75
        p = 2.5
        motion.kind = shear2d
        motion.center = 0.5, 0.25
        diagnostics.checks = mass, energy
        diagnostics.seed = 42
        ode.stride = 0.01
        stability.deltas = 0.1, 0.001
    """)
    text = render_config(config)
    assert "diagnostics.checks = mass, energy" in text
    assert "# effective quad.order = 16" in text
    assert "quad.order" not in text.replace("# effective quad.order", "")
    assert parse_text(text) == config


def test_motion_family_defaults():
    family = parse_text("motion.kind = translation").motion_family()
    assert family.kind == MotionKind.TRANSLATION
    assert family.horizon == 1.0


def test_ode_options():
    options = parse_text("ode.rtol = 1e-9\node.method = implicit_midpoint\node.substeps = 2").ode_options()
    assert options.rtol == 1e-9 and options.method == "implicit_midpoint" and options.substeps == 2


def test_parse_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        parse_config(tmp_path / "absent.cfg")


def test_parse_config_reports_path(write_config):
    path = write_config("T = 0.5\nbogus = 1\n")
    with pytest.raises(ConfigurationError, match="scenario.cfg:2"):
        parse_config(path)
