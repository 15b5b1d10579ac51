from .config import ServiceConfig
from .service import create_app

__all__ = ["ServiceConfig", "create_app"]
