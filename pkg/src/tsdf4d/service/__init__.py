from .app import ROUTES, create_app

__all__ = ["create_app", "ROUTES"]
