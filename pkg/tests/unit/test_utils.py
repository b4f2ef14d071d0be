import json
import math
import numpy as np
import pytest
from src.config.enums import Method, OutputFormat
from src.models.series import ComparisonResult, ObservableSeries
from src.utils.formatters import Formatters, jsonable, write_text
from src.utils.validators import ValidationResult, Validators

pytestmark = pytest.mark.unit


# ==================== Validators ==================== #

@pytest.mark.parametrize("method,temperature,valid", [
    (Method.EXACT, 1.0, True),
    (Method.EXACT, 0.0, False),
    (Method.BOLTZMANN, None, False),
    (Method.STOCHASTIC, math.nan, False),
    (Method.D1, None, True),
    (Method.D1, 0.0, True),
])
def test_validate_temperature(method, temperature, valid):
    result = Validators.validate_temperature(method, temperature)
    assert isinstance(result, ValidationResult)
    assert result.is_valid is valid
    assert result.field == "temperature"


@pytest.mark.parametrize("t_max,dt,valid,steps", [
    (200.0, 0.1, True, 2000),
    (1.0, 1.0, True, 1),
    (10.0, 0.3, False, None),
    (0.0, 0.1, False, None),
    (5.0, 6.0, False, None),
])
def test_validate_time_grid(t_max, dt, valid, steps):
    result = Validators.validate_time_grid(t_max, dt)
    assert result.is_valid is valid
    assert result.cleaned_value == steps


def test_validate_truncations():
    assert Validators.validate_truncations(7, 7, 14, Method.EXACT).is_valid
    assert Validators.validate_truncations(7, 20, 14, Method.BOLTZMANN).is_valid
    bad = Validators.validate_truncations(7, 14, 14, Method.COMPARE_ALL)
    assert not bad.is_valid and bad.field == "boltzmann_trunc_NT"
    assert Validators.validate_truncations(400, 7, 14, Method.STOCHASTIC).field == "fock_trunc_M"


def test_validate_ensemble_size_and_output():
    assert Validators.validate_ensemble_size(100, "samples").is_valid
    assert Validators.validate_ensemble_size(1, "samples").is_valid
    assert not Validators.validate_ensemble_size(0, "samples").is_valid
    assert Validators.validate_output_path(None).is_valid
    assert not Validators.validate_output_path("   ").is_valid
    assert Validators.validate_output_path("out/file.csv").cleaned_value == "out/file.csv"


# ==================== Formatters ==================== #

@pytest.fixture
def series():
    t = np.array([0.0, 0.1, 0.2])
    pz = np.array([1.0, 0.1 + 0.2, -1.0 / 3.0])
    z = np.zeros(3)
    s = ObservableSeries.deterministic(Method.EXACT, t, pz, np.ones(3), z + 2.0 / 7.0, z, z - 1e-300,
                                       fingerprint={"model.V": -0.05, "seed": 7, "integrator.max_step": math.inf})
    s.flag("top population 1.2e-06")
    return s


def test_csv_layout(series):
    text = Formatters.series_csv(series)
    lines = text.splitlines()
    comments = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "time,pz,pz_stderr,norm,e_spin,e_rest,e_total"
    assert "# method=\"exact\"" in comments
    assert "# seed=7" in comments
    assert "# integrator.max_step=\"inf\"" in comments
    assert any(l.startswith("# warning=") for l in comments)
    assert len(body) == 4
    assert text.endswith("\n")


def test_csv_round_trips_doubles(series):
    body = [l for l in Formatters.series_csv(series).splitlines() if not l.startswith("#")][1:]
    parsed = np.array([[float(x) for x in row.split(",")] for row in body])
    np.testing.assert_array_equal(parsed[:, 1], series.pz)
    np.testing.assert_array_equal(parsed[:, 4], series.e_spin)
    np.testing.assert_array_equal(parsed[:, 6], series.e_total)


def test_json_mirrors_csv(series):
    document = json.loads(Formatters.series(series, OutputFormat.JSON))
    assert document["method"] == "exact"
    assert document["columns"]["pz"] == series.pz.tolist()
    assert document["fingerprint"]["seed"] == 7
    assert document["warnings"] == series.warnings


def test_output_deterministic(series):
    assert Formatters.series_csv(series) == Formatters.series_csv(series)


def test_summary_sorted_closest_first():
    results = [ComparisonResult(label="ta-simplified", sup_norm=0.4, rms=0.2, first_divergence_time=12.5),
               ComparisonResult(label="boltzmann-simplified", sup_norm=0.01, rms=0.004)]
    lines = Formatters.summary(results, OutputFormat.CSV, metadata={"seed": 1}).splitlines()
    rows = [l for l in lines if not l.startswith("#")]
    assert rows[0] == "label,sup_norm,rms,first_divergence_time,agrees"
    assert rows[1].startswith("boltzmann-simplified,") and rows[1].endswith(",,true")
    assert rows[2].startswith("ta-simplified,") and rows[2].endswith("12.5,false")

    document = json.loads(Formatters.summary(results, OutputFormat.JSON))
    assert [r["label"] for r in document["comparisons"]] == ["boltzmann-simplified", "ta-simplified"]


def test_matrix_formats():
    m = np.eye(2)
    assert Formatters.matrix(m, OutputFormat.CSV, {"samples": 3}).splitlines() == ["# samples=3", "1,0", "0,1"]
    assert json.loads(Formatters.matrix(m, OutputFormat.JSON))["matrix"] == [[1.0, 0.0], [0.0, 1.0]]


def test_jsonable_handles_numpy_and_specials():
    out = jsonable({"a": np.arange(2), "b": (np.float64(0.5), math.inf), "c": 1 + 2j, "d": Method.TA})
    assert out == {"a": [0, 1], "b": [0.5, "inf"], "c": {"re": 1.0, "im": 2.0}, "d": "ta"}


async def test_write_text_creates_parents(tmp_path):
    target = tmp_path / "deep" / "dir" / "x.csv"
    assert await write_text(str(target), "a\n") == str(target)
    assert target.read_text() == "a\n"
