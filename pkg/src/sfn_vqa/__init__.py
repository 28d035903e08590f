"""
Supporting Facts Network pipeline

Medical visual question answering with a frozen question categorizer routing
between category-specific heads, trained in stages on top of a shared input
fusion module.
"""

__version__ = "2026.0.1.0"
__description__ = "Supporting Facts Network pipeline for medical visual question answering"


def get_main():
    """Lazy import of main function to avoid importing torch at package import"""
    from .main import main

    return main


__all__ = ["get_main"]
