from .app import IndexStore, create_app

__all__ = ["IndexStore", "create_app"]
