import logging
import os

import numpy as np
import pandas as pd
import yaml

from cluster.state import TOLERANCE, ClusterConfig
from exceptions import ConfigurationError, TraceDataError, TraceParseError
from workload.requests import WorkloadTrace, build_requests

TRACE_COLUMNS = ["vm_id", "cpu", "memory", "time", "type"]
RESOURCE_COLUMNS = ["cpu", "memory"]
CREATE, DELETE = 0, 1


def _parse_frame(frame):
    """
    Convert the raw string frame to typed columns, reporting the first bad row.
    """
    parsed = pd.DataFrame({"vm_id": frame["vm_id"].str.strip()})
    for column in ["cpu", "memory", "time", "type"]:
        values = pd.to_numeric(frame[column], errors='coerce')
        bad = values.isna() | frame[column].isna()
        if bad.any():
            row = int(bad.to_numpy().nonzero()[0][0])
            raise TraceParseError(
                f"column '{column}' has non-numeric value {frame[column].iloc[row]!r}",
                line=row + 2)
        parsed[column] = values
    bad_type = ~parsed["type"].isin([CREATE, DELETE])
    if bad_type.any():
        row = int(bad_type.to_numpy().nonzero()[0][0])
        raise TraceParseError(f"type must be 0 or 1, got {parsed['type'].iloc[row]}", line=row + 2)
    if (parsed["time"] != parsed["time"].round()).any():
        row = int((parsed["time"] != parsed["time"].round()).to_numpy().nonzero()[0][0])
        raise TraceParseError("time must be an integer number of seconds", line=row + 2)
    if (parsed[["cpu", "memory"]] < 0).any(axis=None):
        row = int((parsed[["cpu", "memory"]] < 0).any(axis=1).to_numpy().nonzero()[0][0])
        raise TraceParseError("resource demands must be non-negative", line=row + 2)
    parsed["time"] = parsed["time"].astype("int64")
    parsed["type"] = parsed["type"].astype("int64")
    parsed["line"] = parsed.index + 2
    return parsed


def _unplaceable(paired, config):
    """
    Rows whose per-node demand exceeds the NUMA capacity even on an empty PM.
    """
    demand = paired[RESOURCE_COLUMNS[:config.dim]].to_numpy(dtype=np.float64)
    split = demand[:, config.d_div - 1] >= config.c_div
    per_node = demand * np.where(split, 0.5, 1.0)[:, None]
    too_big = (per_node > config.capacity_array + TOLERANCE).any(axis=1)
    return pd.Series(too_big, index=paired.index)


def load_trace(path, config):
    """
    Read a creation/deletion log and pair the records into VM requests.

    Creations without a deletion are dropped; lifetime is deletion time minus
    creation time.

    Args:
        path (str): CSV file with header `vm_id,cpu,memory,time,type`.
        config (ClusterConfig): Cluster block used for D and the split rule.

    Returns:
        WorkloadTrace: Arrival-ordered trace with pairing statistics in `stats`.
    """
    if config.dim > len(RESOURCE_COLUMNS):
        raise ConfigurationError(f"Trace files carry at most {len(RESOURCE_COLUMNS)} resources")
    try:
        frame = pd.read_csv(path, dtype=str, comment='#', skipinitialspace=True)
    except (OSError, pd.errors.ParserError) as e:
        logging.error(f"Error reading trace {path}: {e}")
        raise TraceParseError(f"cannot read trace {path}: {e}") from e
    missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise TraceParseError(f"missing columns {missing}", line=1)
    parsed = _parse_frame(frame)

    creations = parsed[parsed["type"] == CREATE]
    deletions = parsed[parsed["type"] == DELETE]
    duplicated = creations["vm_id"].duplicated()
    if duplicated.any():
        line = int(creations["line"][duplicated].iloc[0])
        raise TraceDataError(f"line {line}: duplicate creation of VM {creations['vm_id'][duplicated].iloc[0]}")
    duplicated = deletions["vm_id"].duplicated()
    if duplicated.any():
        line = int(deletions["line"][duplicated].iloc[0])
        raise TraceDataError(f"line {line}: duplicate deletion of VM {deletions['vm_id'][duplicated].iloc[0]}")

    paired = creations.merge(
        deletions[["vm_id", "time", "line"]], on="vm_id", how="inner", suffixes=("", "_delete"))
    early = paired["time_delete"] < paired["time"]
    if early.any():
        row = paired[early].iloc[0]
        raise TraceDataError(
            f"line {row['line_delete']}: VM {row['vm_id']} deleted at {row['time_delete']} "
            f"before creation at {row['time']}")
    zero = paired["time_delete"] == paired["time"]
    if zero.any():
        logging.warning(f"Dropping {int(zero.sum())} VMs with zero lifetime")
        paired = paired[~zero]
    # keep file order for equal arrival times
    paired = paired.sort_values(["time", "line"], kind="mergesort")
    unplaceable = _unplaceable(paired, config)
    if unplaceable.any():
        lines = [int(line) for line in paired["line"][unplaceable]]
        logging.warning(f"Dropping {len(lines)} VMs that do not fit an empty PM, first at line {lines[0]}")
        paired = paired[~unplaceable]

    rows = [
        (tuple(row[c] for c in RESOURCE_COLUMNS), row["time"], row["time_delete"] - row["time"], row["vm_id"])
        for row in paired.to_dict("records")
    ]
    requests = build_requests(rows, config)
    stats = {
        "creations": int(len(creations)),
        "deletions": int(len(deletions)),
        "paired": int(len(requests)),
        "dropped": int(len(creations) - len(requests)),
        "unplaceable": int(unplaceable.sum()),
    }
    logging.info(
        f"Loaded trace {path}: {stats['creations']} creations, {stats['deletions']} deletions, "
        f"{stats['paired']} paired, {stats['dropped']} dropped ({stats['unplaceable']} unplaceable)")
    return WorkloadTrace(requests, stats=stats)


def save_trace(trace, path, config, header=None):
    """
    Write a trace as a creation/deletion log plus a YAML sidecar with the cluster block.

    Args:
        trace (WorkloadTrace): Trace to write.
        path (str): Destination CSV path; the sidecar is written to `<path>.yaml`.
        config (ClusterConfig): Cluster block the trace was generated for.
        header (str): Optional comment line written before the CSV header.
    """
    records = []
    for vm in trace:
        resources = list(vm.resources) + [0.0] * (len(RESOURCE_COLUMNS) - len(vm.resources))
        vm_id = vm.source_id if vm.source_id is not None else str(vm.id)
        records.append((vm_id, resources[0], resources[1], vm.arrival, CREATE, vm.id, 0))
        records.append((vm_id, resources[0], resources[1], vm.departure, DELETE, vm.id, 1))
    frame = pd.DataFrame.from_records(records, columns=TRACE_COLUMNS + ["_order", "_kind"])
    frame = frame.sort_values(["time", "_kind", "_order"], kind="mergesort")
    frame = frame.drop(columns=["_order", "_kind"])
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as file:
            if header:
                file.write(f"# {header}\n")
            frame.to_csv(file, index=False, float_format="%.17g")
        with open(path + '.yaml', 'w', encoding='utf-8') as file:
            yaml.safe_dump({"cluster": {
                "pm_count": config.m,
                "resource_dim": config.dim,
                "capacities": list(config.capacities),
                "d_div": config.d_div,
                "c_div": config.c_div,
            }}, file, sort_keys=True)
        logging.info(f"Trace with {len(trace)} requests written to {path}")
    except OSError as e:
        logging.error(f"Error writing trace {path}: {e}")
        raise


def load_sidecar_config(path):
    """
    Read the cluster block stored next to a generated trace, if any.

    Args:
        path (str): Trace CSV path.

    Returns:
        ClusterConfig or None: The stored cluster block.
    """
    sidecar = path + '.yaml'
    if not os.path.exists(sidecar):
        return None
    with open(sidecar, 'r', encoding='utf-8') as file:
        block = (yaml.safe_load(file) or {}).get("cluster", {})
    return ClusterConfig(
        m=int(block["pm_count"]),
        dim=int(block["resource_dim"]),
        capacities=tuple(block["capacities"]),
        d_div=int(block["d_div"]),
        c_div=float(block["c_div"]),
    )
