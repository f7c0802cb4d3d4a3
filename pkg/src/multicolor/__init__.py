"""Issue-driven code localization over mixed Python/C++/QML repositories."""

__version__ = "0.1.0"
