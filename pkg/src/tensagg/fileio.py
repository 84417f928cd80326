"""Plain-text exchange formats for tensors, masks, matrices, and run configs.

Tensor files carry a ``dims I J K`` header line followed by one
``i j k value`` line per stored entry (1-based indices).  Entries absent
from the file are unobserved (mask 0) and store the value 0; a mask can
instead be given explicitly as a companion file in the same format with
0/1 values.  Matrices use the analogous ``dims R C`` header with
``row col value`` triplets.  Values are written with 17 significant
digits so a write/read round trip is bit-exact.
"""

import configparser

import numpy as np

from .core import as_mask, as_tensor

__all__ = ["write_tensor", "read_tensor", "write_matrix", "read_matrix",
           "read_config", "ConfigError"]

FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def write_tensor(path, t, mask=None):
    """Write a tensor, storing only mask-1 entries (all entries if no mask)."""
    t = as_tensor(t)
    if mask is not None:
        mask = as_mask(mask, t.shape)
    i, j, k = t.shape
    with open(path, "w") as fh:
        fh.write(f"dims {i} {j} {k}\n")
        for kk in range(k):
            for jj in range(j):
                for ii in range(i):
                    if mask is None or mask[ii, jj, kk] == 1.0:
                        fh.write(f"{ii + 1} {jj + 1} {kk + 1} "
                                 f"{FLOAT_FMT % t[ii, jj, kk]}\n")


def read_tensor(path, mask_path=None):
    """Read a tensor file; returns ``(tensor, mask)``.

    Without a companion mask file, listed entries are observed and the
    rest are mask-0.  With one, the mask comes from the companion and the
    main file supplies values (absent entries are 0).
    """
    dims, entries = _read_entries(path, 3)
    t = np.zeros(dims)
    listed = np.zeros(dims)
    for idx, value in entries:
        t[idx] = value
        listed[idx] = 1.0
    if mask_path is None:
        return t, listed
    mdims, mentries = _read_entries(mask_path, 3)
    if mdims != dims:
        raise ValueError(f"mask dims {mdims} do not match tensor dims {dims}")
    mask = np.zeros(dims)
    for idx, value in mentries:
        if value not in (0.0, 1.0):
            raise ValueError(f"mask entry at {tuple(x + 1 for x in idx)} is {value}, "
                             "expected 0 or 1")
        mask[idx] = value
    return t * mask, mask


def write_matrix(path, m):
    m = np.asarray(m, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"dims {m.shape[0]} {m.shape[1]}\n")
        for r in range(m.shape[0]):
            for c in range(m.shape[1]):
                if m[r, c] != 0.0:
                    fh.write(f"{r + 1} {c + 1} {FLOAT_FMT % m[r, c]}\n")


def read_matrix(path):
    dims, entries = _read_entries(path, 2)
    m = np.zeros(dims)
    for idx, value in entries:
        m[idx] = value
    return m


def _read_entries(path, n_index):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("dims "):
        raise ValueError(f"{path}: first line must be a 'dims ...' header")
    head = lines[0].split()
    if len(head) != n_index + 1:
        raise ValueError(f"{path}: header {lines[0]!r} must list {n_index} dims")
    dims = tuple(int(x) for x in head[1:])
    if min(dims) < 1:
        raise ValueError(f"{path}: dims must be positive, got {dims}")
    entries = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != n_index + 1:
            raise ValueError(f"{path}:{ln}: expected {n_index + 1} fields, got {len(parts)}")
        idx = tuple(int(p) - 1 for p in parts[:n_index])
        for axis, (x, n) in enumerate(zip(idx, dims)):
            if not 0 <= x < n:
                raise ValueError(f"{path}:{ln}: index {x + 1} out of range for axis "
                                 f"{axis + 1} of size {n}")
        entries.append((idx, float(parts[n_index])))
    return dims, entries


def read_config(path, required=()):
    """Parse an INI-style run config into a nested dict of strings.

    ``required`` lists mandatory ``section.key`` names; a missing one
    raises :class:`ConfigError` naming the key.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = {section: dict(parser.items(section)) for section in parser.sections()}
    for name in required:
        section, _, key = name.partition(".")
        if section not in cfg or key not in cfg[section]:
            raise ConfigError(f"{path}: missing required key '{name}'")
    return cfg
