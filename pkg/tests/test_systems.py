import numpy as np
import pytest

from sheafsys import (
    BUILTIN_SYSTEMS,
    ConfigError,
    Polynomial,
    bundle_from_config,
    check_metriplectic_structure,
    check_structure,
    load_config,
    parse_polynomial,
    resolve_builtin,
    seeded_initial_states,
)
from sheafsys.systems import blowup_field, hat, linear_field


def test_hat_matches_the_cross_product():
    rng = np.random.default_rng(2)
    for _ in range(10):
        v, w = rng.standard_normal(3), rng.standard_normal(3)
        assert np.allclose(hat(v) @ w, np.cross(v, w))


def test_polynomial_value_and_gradient():
    # H = 0.5 q^2 + 1.5 q p^2
    poly = Polynomial(2, ((0.5, (2, 0)), (1.5, (1, 2))))
    x = np.array([2.0, 3.0])
    assert poly(x) == pytest.approx(0.5 * 4 + 1.5 * 2 * 9)
    grad = poly.gradient(x)
    assert grad[0] == pytest.approx(2.0 + 1.5 * 9)
    assert grad[1] == pytest.approx(1.5 * 2 * 2 * 3)
    # spot-check against central differences
    eps = 1e-6
    for i in range(2):
        bump = np.zeros(2)
        bump[i] = eps
        fd = (poly(x + bump) - poly(x - bump)) / (2 * eps)
        assert grad[i] == pytest.approx(fd, rel=1e-6)


def test_parse_polynomial_round_trip_and_errors():
    doc = {"terms": [{"coeff": 0.5, "powers": [2, 0]}, {"coeff": 1.0, "powers": [0, 2]}]}
    poly = parse_polynomial(doc, 2)
    assert poly(np.array([1.0, 2.0])) == pytest.approx(4.5)
    with pytest.raises(ConfigError):
        parse_polynomial({"terms": [{"coeff": 1.0, "powers": [1]}]}, 2)
    with pytest.raises(ConfigError):
        parse_polynomial({"terms": [{"coeff": 1.0, "powers": [-1, 0]}]}, 2)
    with pytest.raises(ConfigError):
        parse_polynomial({"nope": []}, 2)


def test_builtin_systems_pass_their_structure_checks():
    assert set(BUILTIN_SYSTEMS) == {"blowup", "linear", "mass_spring", "rigid_body"}
    check_structure(resolve_builtin("mass_spring").instance)
    check_metriplectic_structure(resolve_builtin("rigid_body").instance)
    assert blowup_field()(0.0, np.array([2.0]))[0] == 4.0
    assert linear_field()(0.0, np.array([3.0]))[0] == -3.0


def test_resolve_builtin_handles_params_and_unknowns():
    bundle = resolve_builtin("mass_spring", {"k": 4.0})
    assert bundle.parameters["k"] == 4.0
    q = np.array([1.0, 0.0])
    assert bundle.instance.hamiltonian(q) == pytest.approx(2.0)
    with pytest.raises(ConfigError) as info:
        resolve_builtin("pendulum")
    assert "mass_spring" in str(info.value)
    with pytest.raises(ConfigError):
        resolve_builtin("mass_spring", {"stiffness": 1.0})


def test_bundle_from_config_builtin_reference():
    bundle = bundle_from_config({"system": "rigid_body", "params": {"gamma": 0.2}})
    assert bundle.kind == "mp"
    assert bundle.parameters["gamma"] == 0.2
    with pytest.raises(ConfigError):
        bundle_from_config({"system": "mass_spring", "params": 7})
    with pytest.raises(ConfigError):
        bundle_from_config({"kind": "spectral"})


def test_bundle_from_config_explicit_port_system():
    doc = {
        "kind": "ph",
        "n": 2,
        "m": 1,
        "J": [[0.0, 1.0], [-1.0, 0.0]],
        "R": [[0.0, 0.0], [0.0, 0.0]],
        "B": [[0.0], [1.0]],
        "H": {"terms": [
            {"coeff": 0.5, "powers": [2, 0]},
            {"coeff": 0.5, "powers": [0, 2]},
        ]},
        "labels": ["q", "p"],
        "x0": [1.0, 0.0],
        "length": 4.0,
    }
    bundle = bundle_from_config(doc)
    assert bundle.kind == "ph" and bundle.default_length == 4.0
    check_structure(bundle.instance)
    assert bundle.instance.hamiltonian(np.array([1.0, 1.0])) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        bundle_from_config({**doc, "B": [[0.0, 1.0]]})
    with pytest.raises(ConfigError):
        bundle_from_config({**doc, "x0": [1.0]})
    doc_no_dims = {k: v for k, v in doc.items() if k != "n"}
    with pytest.raises(ConfigError):
        bundle_from_config(doc_no_dims)


def test_bundle_from_config_explicit_two_generator_system():
    doc = {
        "kind": "mp",
        "n": 2,
        "m": 1,
        "J": [[0.0, 1.0], [-1.0, 0.0]],
        "G": [[0.0, 0.0], [0.0, 0.0]],
        "B": [[0.0], [0.0]],
        "A": [[0.0], [0.0]],
        "Jt": [[0.0]],
        "Gt": [[0.0]],
        "H": {"terms": [
            {"coeff": 0.5, "powers": [2, 0]},
            {"coeff": 0.5, "powers": [0, 2]},
        ]},
        "S": {"terms": []},
        "x0": [1.0, 0.0],
    }
    bundle = bundle_from_config(doc)
    assert bundle.kind == "mp"
    check_metriplectic_structure(bundle.instance)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(broken)
    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(listy)


def test_seeded_initial_states_are_deterministic_and_bounded():
    a = seeded_initial_states(9, 5, 3)
    b = seeded_initial_states(9, 5, 3)
    assert all(np.all(x == y) for x, y in zip(a, b))
    assert all(np.all(np.abs(x) <= 2.0) for x in a)
    c = seeded_initial_states(10, 5, 3)
    assert not np.allclose(a[0], c[0])
