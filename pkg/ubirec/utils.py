# ubirec/utils.py
# Helper functions for line-delimited record files and scenario documents

import json
import logging
import os
import re

from .errors import InvalidInputError

logger = logging.getLogger(__name__)


# --- Line-delimited JSON records ---
def write_jsonl(path, records):
    """Writes one compact JSON object per line. Key order is kept as given."""
    dest_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(dest_dir, exist_ok=True)
    count = 0
    # newline='\n' keeps the bytes identical across platforms
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(',', ':'), ensure_ascii=False))
            fh.write('\n')
            count += 1
    logger.debug("Wrote %d records to %s", count, path)
    return count


def read_jsonl(path):
    """Reads a line-delimited JSON file, skipping blank lines."""
    records = []
    with open(path, 'r', encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise InvalidInputError(f"{os.path.basename(path)} line {lineno}: {e.msg}") from e
    return records


# --- Scenario document helpers ---
def line_of_key(text, key):
    """Returns the 1-based line of the first occurrence of a JSON key, or None."""
    if not text or not key:
        return None
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    if match is None:
        return None
    return text.count('\n', 0, match.start()) + 1


def run_file_stem(kind, algorithm, seed):
    """Stem shared by every per-run artifact, e.g. ``precision_cfql_seed7``."""
    return f"{kind}_{algorithm}_seed{seed}"
