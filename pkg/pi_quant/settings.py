from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class PiQuantSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="PIQUANT_")

    default_lambda: int = 2
    seed: int = 42
    threads: int = 1
    log_level: str = "WARNING"
    bound_slack: float = 2.0
    himmelblau_lr: float = 0.01
    mlp_lr: float = 0.001


settings = PiQuantSettings()
