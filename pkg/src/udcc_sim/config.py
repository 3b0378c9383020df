"""Flat ``key = value`` run configuration, overrides and sweep expansion."""

import hashlib
import itertools
import re

from .kernel import TICKS_PER_MS, TICKS_PER_NS, TICKS_PER_S, TICKS_PER_US

_TIME_UNITS = {"ps": 1, "ns": TICKS_PER_NS, "us": TICKS_PER_US, "ms": TICKS_PER_MS, "s": TICKS_PER_S}
_SIZE_UNITS = {"": 1, "b": 1, "kb": 1 << 10, "mb": 1 << 20, "gb": 1 << 30}


class ConfigError(ValueError):
    pass


def parse_time(text):
    """``"100us"`` -> ticks.  A bare number is already in ticks (ps)."""
    if isinstance(text, int):
        return text
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*(ps|ns|us|ms|s)?\s*", str(text))
    if not m:
        raise ConfigError("not a time value: %r" % text)
    return int(round(float(m.group(1)) * _TIME_UNITS[m.group(2) or "ps"]))


def parse_size(text):
    if isinstance(text, int):
        return text
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*([kKmMgG]?[bB]?)\s*", str(text))
    if not m:
        raise ConfigError("not a size: %r" % text)
    value = float(m.group(1)) * _SIZE_UNITS[m.group(2).lower()]
    if value != int(value):
        raise ConfigError("size %r is not a whole number of bytes" % text)
    return int(value)


def parse_bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError("not a boolean: %r" % text)


def _int(text):
    if isinstance(text, bool):
        raise ConfigError("expected an integer, got %r" % text)
    if isinstance(text, int):
        return text
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError("expected an integer, got %r" % text) from None


def _choice(*options):
    def parse(text):
        value = str(text).strip().lower()
        for opt in options:
            if value == opt.lower():
                return opt
        raise ConfigError("expected one of %s, got %r" % ("/".join(options), text))
    return parse


def _optional(parse):
    def wrapped(text):
        if text is None or str(text).strip().lower() in ("", "none", "max"):
            return None
        return parse(text)
    return wrapped


def _optional_str(text):
    if text is None or str(text).strip() == "":
        return None
    return str(text).strip()


# key -> (parser, default)
SCHEMA = {
    "mode": (_choice("dram_cache", "dram_only", "nvm_only"), "dram_cache"),
    "policy": (_choice("frfcfs", "fcfs"), "frfcfs"),
    "orb_size": (_int, 256),
    "crb_size": (_int, 32),
    "wb_queue_size": (_int, 128),
    "nvm_priority": (_choice("reads", "writes"), "reads"),
    "cache_size": (parse_size, 16 << 20),
    "shared_bus": (_choice("auto", "true", "false"), "auto"),
    "dram.preset": (_choice("ddr3", "ddr4", "ddr5", "hbm"), "ddr4"),
    "dram.addr_map": (_choice("RoBaCo", "RoCoBa"), "RoBaCo"),
    "dram.tBURST": (_optional(parse_time), None),
    "dram.tRCD": (_optional(parse_time), None),
    "dram.tCL": (_optional(parse_time), None),
    "dram.tRP": (_optional(parse_time), None),
    "dram.tWL": (_optional(parse_time), None),
    "dram.tWTR": (_optional(parse_time), None),
    "dram.tRTW": (_optional(parse_time), None),
    "dram.num_banks": (_optional(_int), None),
    "dram.row_bytes": (_optional(parse_size), None),
    "dram.frontend_latency": (_optional(parse_time), None),
    "dram.backend_latency": (_optional(parse_time), None),
    "nvm.preset": (_choice("slow", "base", "fast"), "base"),
    "nvm.tREAD": (_optional(parse_time), None),
    "nvm.tWRITE": (_optional(parse_time), None),
    "nvm.tSEND": (_optional(parse_time), None),
    "nvm.tBURST": (_optional(parse_time), None),
    "nvm.write_units": (_int, 13),
    "nvm.max_pending_reads": (_int, 64),
    "nvm.write_buffer": (_int, 128),
    "nvm.wear_leveling": (parse_bool, False),
    "nvm.wear_interval": (_int, 14000),
    "nvm.wear_stall_ns": (_int, 60000),
    "nvm.wear_gate": (_choice("all", "writes"), "all"),
    "traffic.pattern": (_choice("linear", "random"), "linear"),
    "traffic.read_pct": (_int, 100),
    "traffic.range": (_optional(parse_size), None),
    "traffic.hit_ratio": (_optional(_int), None),
    "traffic.start": (parse_size, 0),
    "traffic.inject_interval": (_optional(parse_time), None),
    "traffic.duration": (parse_time, 1 * TICKS_PER_MS),
    "traffic.seed": (_optional(_int), None),
    "trace.path": (_optional_str, None),
    "warmup": (_choice("functional", "none"), "functional"),
    "warmup.settle": (parse_time, 50 * TICKS_PER_US),
    "stats.timeseries_interval": (_optional(parse_time), None),
    "seed": (_int, 1),
}

ALIASES = {"duration": "traffic.duration", "dram": "dram.preset", "nvm": "nvm.preset",
           "wear_leveling": "nvm.wear_leveling"}

DRAM_OVERRIDES = ("tBURST", "tRCD", "tCL", "tRP", "tWL", "tWTR", "tRTW", "num_banks",
                  "row_bytes", "frontend_latency", "backend_latency")
NVM_OVERRIDES = ("tREAD", "tWRITE", "tSEND", "tBURST")


def canonical_key(key):
    key = key.strip()
    key = ALIASES.get(key, key)
    if key not in SCHEMA:
        raise ConfigError("unknown config key %r" % key)
    return key


def defaults():
    return {k: v for k, (_, v) in SCHEMA.items()}


def _expand_numbers(items):
    """Expand ``a, b, ..., z`` into a progression.

    The progression is geometric when ``z`` is reachable from ``a`` by
    repeated multiplication with ``b / a``, otherwise arithmetic.
    """
    if "..." not in items:
        return items
    pos = items.index("...")
    if pos < 2 or pos != len(items) - 2:
        raise ConfigError("'...' needs two leading values and one final value")
    try:
        a, b, z = (int(items[pos - 2]), int(items[pos - 1]), int(items[-1]))
    except ValueError:
        raise ConfigError("'...' only expands integer sequences") from None
    out = [int(x) for x in items[:pos - 2]]
    if a > 0 and b > a and b % a == 0:
        r = b // a
        seq = [a]
        while seq[-1] < z:
            seq.append(seq[-1] * r)
        if seq[-1] == z:
            return [str(x) for x in out + seq]
    step = b - a
    if step == 0 or (z - a) % step or (z - a) // step < 0:
        raise ConfigError("cannot expand %s, %s, ..., %s" % (a, b, z))
    return [str(x) for x in out + list(range(a, z + 1 if step > 0 else z - 1, step))]


def parse_value(key, text):
    """Parse one raw value; a comma list becomes a sweep axis (a list)."""
    parse = SCHEMA[key][0]
    if isinstance(text, str) and "," in text:
        items = _expand_numbers([t.strip() for t in text.split(",") if t.strip()])
        try:
            return [parse(t) for t in items]
        except ConfigError as exc:
            raise ConfigError("%s: %s" % (key, exc)) from None
    try:
        return parse(text)
    except ConfigError as exc:
        raise ConfigError("%s: %s" % (key, exc)) from None


def parse_lines(lines, source="<config>"):
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected key = value" % (source, lineno))
        key, value = line.split("=", 1)
        try:
            key = canonical_key(key)
            out[key] = parse_value(key, value.strip())
        except ConfigError as exc:
            raise ConfigError("%s:%d: %s" % (source, lineno, exc)) from None
    return out


def parse_overrides(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError("override %r is not key=value" % pair)
        key, value = pair.split("=", 1)
        key = canonical_key(key)
        out[key] = parse_value(key, value.strip())
    return out


def parse_config(path=None, overrides=()):
    """Read a config file (optional), apply overrides, validate."""
    cfg = defaults()
    if path is not None:
        with open(path) as fh:
            cfg.update(parse_lines(fh, str(path)))
    cfg.update(parse_overrides(overrides))
    validate(cfg)
    return cfg


def validate(cfg):
    values = [cfg] if not sweep_axes(cfg) else list(point for _, point in expand(cfg))
    for point in values:
        if point.get("trace.path") and (point.get("traffic.range") is not None
                                        or point.get("traffic.hit_ratio") is not None):
            raise ConfigError("conflicting workload sources: trace.path and synthetic traffic "
                              "(traffic.range / traffic.hit_ratio)")
        if point.get("traffic.range") is not None and point.get("traffic.hit_ratio") is not None:
            raise ConfigError("set either traffic.range or traffic.hit_ratio, not both")


def sweep_axes(cfg):
    return [k for k, v in cfg.items() if isinstance(v, list)]


def derive_seed(root, coords):
    text = repr((root, tuple(sorted(coords.items()))))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


def expand(cfg):
    """Yield ``(coords, point)`` for the cross-product of all sweep axes.

    Each point's traffic seed comes from the root seed and its coordinates
    unless ``traffic.seed`` pins it.
    """
    axes = sweep_axes(cfg)
    for combo in itertools.product(*(cfg[k] for k in axes)):
        coords = dict(zip(axes, combo))
        point = dict(cfg)
        point.update(coords)
        if point.get("traffic.seed") is None:
            point["traffic.seed"] = derive_seed(point["seed"], coords)
        yield coords, point
