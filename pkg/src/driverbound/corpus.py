"""Trace corpora on disk.

A corpus is a directory holding ``metadata.json`` and one CSV per trace
(``trace_00001.csv``, ...).  Labels live in the metadata, not the CSVs.
Counterexample corpora also carry a ``manifest.json``.
"""

import json
import os

from driverbound.trace import LABELS, Limits, TraceError, load_trace, save_trace

METADATA = "metadata.json"
MANIFEST = "manifest.json"


def dump_json(obj, path):
    """Write JSON deterministically (sorted keys, fixed indentation)."""
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def trace_name(i):
    return f"trace_{i + 1:05d}.csv"


def save_corpus(traces, path, metadata=None, manifest=None):
    os.makedirs(path, exist_ok=True)
    files = []
    for i, tr in enumerate(traces):
        name = trace_name(i)
        save_trace(tr, os.path.join(path, name))
        files.append(name)
    meta = dict(metadata or {})
    meta["files"] = files
    meta["labels"] = [tr.label for tr in traces]
    dump_json(meta, os.path.join(path, METADATA))
    if manifest is not None:
        dump_json(manifest, os.path.join(path, MANIFEST))
    return path


def read_metadata(path):
    meta_path = os.path.join(path, METADATA)
    if not os.path.isfile(meta_path):
        raise FileNotFoundError(f"{meta_path} not found")
    with open(meta_path) as fh:
        return json.load(fh)


def read_manifest(path):
    with open(os.path.join(path, MANIFEST)) as fh:
        return json.load(fh)


def load_corpus(path, limits=Limits()):
    meta = read_metadata(path)
    files = meta.get("files")
    labels = meta.get("labels")
    if files is None or labels is None or len(files) != len(labels):
        raise TraceError(f"{path}: metadata must list files and labels of equal length")
    traces = []
    for name, label in zip(files, labels):
        if label not in (None, *LABELS):
            raise TraceError(f"{name}: unknown label {label!r}")
        try:
            traces.append(load_trace(os.path.join(path, name), label=label, limits=limits))
        except TraceError as exc:
            raise TraceError(f"{name}: {exc}") from None
    return traces
