import logging

import pandas as pd

LOG_COLUMNS = ["j", "at", "st", "wait", "action", "pm", "numa_mask"]


def episode_frame(result):
    """
    Tabulate the served VMs of an episode; PM ids are 1-based as in action ids.
    """
    rows = [(r.j, r.at, r.st, r.wait, r.action, r.pm + 1, "|".join(str(i) for i in r.numa_mask))
            for r in result.records]
    return pd.DataFrame.from_records(rows, columns=LOG_COLUMNS)


def write_csv(frame, path, header=None):
    """
    Write a frame as CSV, optionally preceded by a `# ...` comment line.

    Args:
        frame (pandas.DataFrame): Table to write.
        path (str): Destination file.
        header (str): Comment text, e.g. the config hash and seed.
    """
    try:
        with open(path, 'w', encoding='utf-8', newline='') as file:
            if header:
                file.write(f"# {header}\n")
            frame.to_csv(file, index=False, lineterminator='\n')
    except OSError as e:
        logging.error(f"Error writing {path}: {e}")
        raise


def write_episode_log(result, path, header=None):
    write_csv(episode_frame(result), path, header)
    logging.info(f"Episode log with {result.requests_served} rows written to {path}")
