from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Logging Configuration
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"
    LOG_MAX_FILE_SIZE: int = 10485760  # 10MB in bytes
    LOG_BACKUP_COUNT: int = 5
    LOG_COLORS: str = "true"

    # Environment
    ENVIRONMENT: str = "development"

    # Kernel operator store; overrides kernel.cache_dir when set
    CHOQUARD_CACHE: str = ""

    # Dense N x N operators above this size are refused
    MAX_OPERATOR_N: int = 8192
    # Bytes of one dense table before a size warning is logged
    OPERATOR_WARN_BYTES: int = 1 << 30

    DEFAULT_WORKERS: int = 4

    class Config:
        env_file = ".env"
        extra = "ignore"


settings = Settings()
