"""Turn guideline prose into IF-THEN rules."""

__version__ = "0.1.0"
