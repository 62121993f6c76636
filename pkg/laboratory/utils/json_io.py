import json
import os
import logging

from django.conf import settings

logger = logging.getLogger(__name__)


def decimal_string(value, ctx, digits=None):
    """Decimal text of a real mpf value that survives a round trip."""
    digits = digits or ctx.digits + ctx.guard_digits
    return ctx.mp.nstr(ctx.mp.mpf(value), digits, min_fixed=-1, max_fixed=0)


def complex_record(value, ctx, digits=None):
    value = ctx.mp.mpc(value)
    return {'re': decimal_string(value.real, ctx, digits), 'im': decimal_string(value.imag, ctx, digits)}


def parse_complex(record, ctx):
    return ctx.mp.mpc(ctx.mp.mpf(record['re']), ctx.mp.mpf(record['im']))


class JSONDataStore:
    """Read and write the laboratory's JSON documents."""

    def __init__(self, base_dir=None):
        self.base_dir = str(base_dir or settings.BASE_DIR)

    def resolve(self, *parts):
        return os.path.join(self.base_dir, *parts)

    def load(self, path):
        """Return the parsed document, or None when it is missing or unreadable."""
        if not os.path.exists(path):
            logger.warning(f"JSON file not found: {path}")
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, ValueError) as e:
            logger.error(f"Error loading {path}: {str(e)}")
            return None

    def dump(self, path, payload):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        tmp_path = f"{path}.tmp"
        with open(tmp_path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=1, sort_keys=True)
            f.write('\n')
        os.replace(tmp_path, path)
        logger.info(f"Wrote {os.path.basename(path)}")
        return path
