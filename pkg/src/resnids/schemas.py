"""Built-in column tables for the supported flow-feature datasets.

Column kinds:
  numeric     parsed as float64, z-scored
  categorical expanded into one indicator column per observed value
  label       the training class column
  binary      0/1 attack flag kept only to cross-check the class column
  ignore      present in the file, dropped on parse

A schema override file replaces the built-in table: one ``name:kind`` line
per column, in file order, ``#`` comments allowed, exactly one label column.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, DataError

KINDS = ("numeric", "categorical", "label", "binary", "ignore")

NSLKDD = "nslkdd"
UNSWNB15 = "unswnb15"
GENERIC = "generic"
DATASET_IDS = (NSLKDD, UNSWNB15, GENERIC)


@dataclass(frozen=True)
class Column:
    name: str
    kind: str


@dataclass(frozen=True)
class Schema:
    dataset_id: str
    columns: tuple[Column, ...]

    @property
    def n_fields(self) -> int:
        return len(self.columns)

    def feature_columns(self) -> list[tuple[int, Column]]:
        return [(i, c) for i, c in enumerate(self.columns)
                if c.kind in ("numeric", "categorical")]

    @property
    def label_index(self) -> int:
        idx = [i for i, c in enumerate(self.columns) if c.kind == "label"]
        if len(idx) != 1:
            raise ConfigError(
                f"schema must have exactly one label column, found {len(idx)}"
            )
        return idx[0]

    @property
    def binary_index(self) -> int | None:
        idx = [i for i, c in enumerate(self.columns) if c.kind == "binary"]
        return idx[0] if idx else None

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


def _cols(numeric=(), categorical=()):
    mapping = {}
    for n in numeric:
        mapping[n] = "numeric"
    for n in categorical:
        mapping[n] = "categorical"
    return mapping


_NSLKDD_ORDER = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
    "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate", "label", "difficulty",
]
_NSLKDD_CATEGORICAL = {"protocol_type", "service", "flag"}

NSLKDD_SCHEMA = Schema(
    dataset_id=NSLKDD,
    columns=tuple(
        Column(
            n,
            "label" if n == "label"
            else "ignore" if n == "difficulty"
            else "categorical" if n in _NSLKDD_CATEGORICAL
            else "numeric",
        )
        for n in _NSLKDD_ORDER
    ),
)

# Attack-name -> category map for the 5-class grouping of the KDD label
# column.  Names span both the train and test file vocabularies.
NSLKDD_LABEL_MAP = {
    "normal": "Normal",
    # denial of service
    "back": "DoS", "land": "DoS", "neptune": "DoS", "pod": "DoS",
    "smurf": "DoS", "teardrop": "DoS", "apache2": "DoS", "mailbomb": "DoS",
    "processtable": "DoS", "udpstorm": "DoS",
    # probing
    "ipsweep": "Probe", "nmap": "Probe", "portsweep": "Probe",
    "satan": "Probe", "mscan": "Probe", "saint": "Probe",
    # remote-to-local
    "ftp_write": "R2L", "guess_passwd": "R2L", "imap": "R2L",
    "multihop": "R2L", "phf": "R2L", "spy": "R2L", "warezclient": "R2L",
    "warezmaster": "R2L", "httptunnel": "R2L", "named": "R2L",
    "sendmail": "R2L", "snmpgetattack": "R2L", "snmpguess": "R2L",
    "xlock": "R2L", "xsnoop": "R2L", "worm": "R2L",
    # user-to-root
    "buffer_overflow": "U2R", "loadmodule": "U2R", "perl": "U2R",
    "rootkit": "U2R", "ps": "U2R", "sqlattack": "U2R", "xterm": "U2R",
}

_UNSW_ORDER = [
    ("id", "ignore"),
    ("dur", "numeric"), ("proto", "categorical"), ("service", "categorical"),
    ("state", "categorical"), ("spkts", "numeric"), ("dpkts", "numeric"),
    ("sbytes", "numeric"), ("dbytes", "numeric"), ("rate", "numeric"),
    ("sttl", "numeric"), ("dttl", "numeric"), ("sload", "numeric"),
    ("dload", "numeric"), ("sloss", "numeric"), ("dloss", "numeric"),
    ("sinpkt", "numeric"), ("dinpkt", "numeric"), ("sjit", "numeric"),
    ("djit", "numeric"), ("swin", "numeric"), ("stcpb", "numeric"),
    ("dtcpb", "numeric"), ("dwin", "numeric"), ("tcprtt", "numeric"),
    ("synack", "numeric"), ("ackdat", "numeric"), ("smean", "numeric"),
    ("dmean", "numeric"), ("trans_depth", "numeric"),
    ("response_body_len", "numeric"), ("ct_srv_src", "numeric"),
    ("ct_state_ttl", "numeric"), ("ct_dst_ltm", "numeric"),
    ("ct_src_dport_ltm", "numeric"), ("ct_dst_sport_ltm", "numeric"),
    ("ct_dst_src_ltm", "numeric"), ("is_ftp_login", "numeric"),
    ("ct_ftp_cmd", "numeric"), ("ct_flw_http_mthd", "numeric"),
    ("ct_src_ltm", "numeric"), ("ct_srv_dst", "numeric"),
    ("is_sm_ips_ports", "numeric"),
    ("attack_cat", "label"), ("label", "binary"),
]

UNSWNB15_SCHEMA = Schema(
    dataset_id=UNSWNB15,
    columns=tuple(Column(n, k) for n, k in _UNSW_ORDER),
)


def get_schema(dataset_id: str) -> Schema:
    if dataset_id == NSLKDD:
        return NSLKDD_SCHEMA
    if dataset_id == UNSWNB15:
        return UNSWNB15_SCHEMA
    raise ConfigError(
        f"no built-in schema for dataset {dataset_id!r}; "
        "provide a schema override file"
    )


def label_class(dataset_id: str, raw: str) -> str | None:
    """Map a raw label field to its class name; None marks an unknown label."""
    value = raw.strip()
    if dataset_id == NSLKDD:
        return NSLKDD_LABEL_MAP.get(value.lower())
    if dataset_id == UNSWNB15:
        return value if value else "Normal"
    return value if value else None


def parse_schema_file(path, dataset_id: str = GENERIC) -> Schema:
    """Read an ordered ``name:kind`` schema override file."""
    columns = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise DataError(f"{path}:{ln}: expected 'name:kind', got {line!r}")
            name, kind = (part.strip() for part in line.split(":", 1))
            if kind not in KINDS:
                raise DataError(
                    f"{path}:{ln}: unknown column kind {kind!r} "
                    f"(expected one of {', '.join(KINDS)})"
                )
            columns.append(Column(name, kind))
    schema = Schema(dataset_id=dataset_id, columns=tuple(columns))
    schema.label_index  # validates exactly one label column
    return schema


def schema_to_lines(schema: Schema) -> str:
    return "\n".join(f"{c.name}:{c.kind}" for c in schema.columns) + "\n"
