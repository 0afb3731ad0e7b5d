import json

import numpy as np
import pytest
from pydantic import ValidationError

from piezoscatter.core.exceptions import (
    ConfigSchemaError,
    MaterialConstraintError,
    PersistenceError,
)
from piezoscatter.dto.config import ProblemConfigDTO, WaveletDTO
from piezoscatter.dto.report import CheckResultDTO, TimeseriesRowDTO
from piezoscatter.repository.config import ConfigRepository, dump_config
from piezoscatter.repository.results import (
    ArrayRepository,
    ReportRepository,
    TimeseriesRepository,
    dump_matrix,
    write_report,
)


def test_sample_config(sample_config):
    assert sample_config.cq.rule == "bdf2"
    assert sample_config.incident.type == "plane_wave"
    assert [p.label for p in sample_config.probes] == ["front", "back"]
    assert sample_config.material_params().lame_mu == 1.0


def test_dump_is_normalized(tmp_path, sample_config, sample_config_path):
    path = dump_config(sample_config, tmp_path / "copy.cfg")
    assert path.read_text() == sample_config_path.read_text()


def test_malformed_json():
    with pytest.raises(ConfigSchemaError, match="line 1"):
        ConfigRepository().parse("{not json")


def test_unknown_key_rejected(material_document):
    text = json.dumps({"material": material_document, "extra": 1})
    with pytest.raises(ConfigSchemaError, match="extra"):
        ConfigRepository().parse(text)


def test_pyro_constraint_enforced_on_load(material_document):
    material_document["pyro_p"] = [0.0, 1.5, 0.0]
    with pytest.raises(MaterialConstraintError):
        ConfigRepository().parse(json.dumps({"material": material_document}))


def test_direction_must_be_unit(material_document):
    with pytest.raises(ValidationError):
        ProblemConfigDTO.model_validate(
            {
                "material": material_document,
                "incident": {
                    "direction": [1.0, 1.0, 0.0],
                    "wavelet": {"name": "ramp", "rise_time": 1.0},
                },
            }
        )


def test_gaussian_needs_late_centre():
    with pytest.raises(ValidationError, match="5/sqrt"):
        WaveletDTO(name="gaussian_pulse", a=4.0, t0=1.0, omega0=0.0)


def test_duplicate_probe_labels(material_document):
    probe = {"label": "p", "point": [0, 0, 3]}
    with pytest.raises(ValidationError, match="unique"):
        ProblemConfigDTO.model_validate(
            {"material": material_document, "probes": [probe, probe]}
        )


def test_report_uses_pass_alias(tmp_path):
    check = CheckResultDTO(
        suite="cq", quantity="q", expected=0.0, actual=0.0, slack=1.0, passed=True
    )
    path = write_report(check, tmp_path / "r.json")
    document = ReportRepository().load(path)
    assert document["pass"] is True
    assert "passed" not in document


def test_timeseries_columns(tmp_path):
    rows = [
        TimeseriesRowDTO(t=0.1, probe="front", field="p", re=1.5, im=-0.25),
        TimeseriesRowDTO(t=0.2, probe="front", field="p", re=0.1),
    ]
    repo = TimeseriesRepository()
    path = repo.save(rows, tmp_path / "probes.csv")
    assert path.read_text().splitlines()[0] == "t,probe,field,re,im"
    assert repo.load(path) == rows


def test_array_repository(tmp_path):
    repo = ArrayRepository()
    path = repo.save(tmp_path / "a.npz", x=np.arange(3.0), z=np.array([1j]))
    data = repo.load(path)
    np.testing.assert_array_equal(data["x"], [0.0, 1.0, 2.0])
    assert data["z"][0] == 1j
    with pytest.raises(PersistenceError):
        repo.load(tmp_path / "missing.npz")


def test_dump_matrix(tmp_path):
    from scipy import sparse

    target = dump_matrix(sparse.eye(3, format="csr"), tmp_path / "m.mtx")
    assert target.read_text().startswith("%%MatrixMarket")
