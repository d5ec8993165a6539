"""Shared jax setup: double precision and a persistent compilation cache."""

from __future__ import annotations

import os
from pathlib import Path

import jax

jax.config.update("jax_enable_x64", True)


def _enable_compile_cache():
    path = os.environ.get("ORBCRAWL_JAX_CACHE", str(Path.home() / ".cache" / "orbcrawl" / "jax"))
    if path.lower() in ("", "0", "off", "none"):
        return
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
    except OSError:
        return
    jax.config.update("jax_compilation_cache_dir", path)
    jax.config.update("jax_persistent_cache_min_compile_time_secs", 0.5)


_enable_compile_cache()
