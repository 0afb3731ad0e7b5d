import json
import logging

from pydantic import ValidationError

from piezoscatter.core.exceptions import ConfigSchemaError
from piezoscatter.dto.config import ProblemConfigDTO
from piezoscatter.repository.base import BaseFileRepository

logger = logging.getLogger(__name__)


class ConfigRepository(BaseFileRepository[ProblemConfigDTO]):
    """JSON problem configurations, validated on load and normalized on save."""

    def parse(self, text: str) -> ProblemConfigDTO:
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigSchemaError(
                f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}"
            )
        try:
            config = ProblemConfigDTO.model_validate(document)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(part) for part in first["loc"]) or "<root>"
            raise ConfigSchemaError(f"{where}: {first['msg']}")

        material = config.material_params()
        material.check_pyro_constraint()
        material.piezo_sign_warnings()
        logger.info(
            f"Loaded config: {len(config.probes)} probes, rule {config.cq.rule}, "
            f"dt {config.cq.dt}, N {config.cq.n_steps}"
        )
        return config

    def format(self, config: ProblemConfigDTO) -> str:
        document = config.model_dump(mode="json")
        return json.dumps(document, sort_keys=True, indent=2) + "\n"


def load_config(path) -> ProblemConfigDTO:
    return ConfigRepository().load(path)


def dump_config(config: ProblemConfigDTO, path):
    return ConfigRepository().save(config, path)
