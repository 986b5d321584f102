from pydantic_settings import BaseSettings
from pydantic import Field


class Settings(BaseSettings):
    model_config = {"env_prefix": "MOPLA_", "env_file": ".env", "env_file_encoding": "utf-8"}

    # Assembly parallelism: quadrature nodes are split into this many contiguous
    # blocks and the partial sums are added in block order.
    threads: int = Field(default=1, ge=1)


settings = Settings()
