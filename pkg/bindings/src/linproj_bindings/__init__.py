"""Foreign-function style bridge to the linproj projection layer."""

from .core import (
    BindingError,
    ffi_backward,
    ffi_build,
    ffi_dimensions,
    ffi_free,
    ffi_project,
)

__all__ = [
    "BindingError",
    "ffi_backward",
    "ffi_build",
    "ffi_dimensions",
    "ffi_free",
    "ffi_project",
]

__version__ = "0.1.0"
