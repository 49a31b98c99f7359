import json
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError

from advmc.models.chain import Dtmc, Mdp, Policy, validate_dtmc, validate_mdp
from advmc.models.files import ModelFile, ThreatFile, TransitionRecord
from advmc.models.results import AttackReport
from advmc.models.threat import IdtmcExport, ThreatModel
from advmc.services.properties import RESERVED
from advmc.utils.errors import ModelError, ParseError
from advmc.utils.logging import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


def _read_json(path: PathLike) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read file: {e.strerror}", path=path) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=path, line=e.lineno) from None


def _parse(schema, raw, path: PathLike):
    try:
        return schema.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ParseError(first["msg"], path=path, field=field) from None


def _write_json(path: PathLike, payload) -> None:
    """Floats go out in shortest round-trip form: every stored double reads back bit-for-bit,
    and any value that is not a short decimal keeps 15-17 significant digits"""
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _labels(data: ModelFile, path: PathLike) -> dict:
    labels = {}
    for key, names in data.labels.items():
        try:
            state = int(key)
        except ValueError:
            raise ParseError(f"label key {key!r} is not a state index", path=path, field=f"labels.{key}") from None
        labels[state] = names
    return labels


def _from_file(data: ModelFile, path: PathLike) -> Union[Dtmc, Mdp]:
    for atom in data.atoms:
        if atom in RESERVED:
            raise ParseError(f"atom {atom!r} is a reserved keyword", path=path, field="atoms")
    seen = set()
    for i, record in enumerate(data.transitions):
        where = f"transitions.{i}"
        if not (0 <= record.source < data.n and 0 <= record.to < data.n):
            raise ParseError(f"transition {record.source}->{record.to} outside 0..{data.n - 1}", path=path, field=where)
        if data.type == "dtmc" and record.action is not None:
            raise ParseError("action is only legal in mdp files", path=path, field=f"{where}.action")
        if data.type == "mdp" and record.action is None:
            raise ParseError("mdp transitions need an action", path=path, field=f"{where}.action")
        key = (record.source, record.action, record.to)
        if key in seen:
            raise ParseError(f"duplicate transition {key}", path=path, field=where)
        seen.add(key)

    labels = _labels(data, path)
    if data.type == "dtmc":
        rows = [[] for _ in range(data.n)]
        for record in data.transitions:
            rows[record.source].append((record.to, record.p))
        return Dtmc.from_rows(rows, init=data.init, atoms=data.atoms, labels=labels)

    table = {}
    for record in data.transitions:
        table.setdefault((record.source, record.action), []).append((record.to, record.p))
    try:
        return Mdp.from_table(data.n, table, init=data.init, actions=data.actions, atoms=data.atoms, labels=labels)
    except ModelError as e:
        raise ParseError(str(e), path=path, field="actions") from None


def load_model(path: PathLike) -> Union[Dtmc, Mdp]:
    data = _parse(ModelFile, _read_json(path), path)
    model = _from_file(data, path)
    if isinstance(model, Dtmc):
        validate_dtmc(model)
    else:
        validate_mdp(model)
    logger.info(f"Loaded {data.type} with {model.n} states from {path}")
    return model


def load_policy(path: PathLike) -> Optional[Policy]:
    data = _parse(ModelFile, _read_json(path), path)
    if data.policy is None:
        return None
    try:
        mapping = {int(k): v for k, v in data.policy.items()}
    except ValueError:
        raise ParseError("policy keys must be state indices", path=path, field="policy") from None
    return Policy.from_mapping(data.n, mapping)


def model_payload(model: Union[Dtmc, Mdp], policy: Optional[Policy] = None) -> dict:
    """Canonical file content; store then load then store is byte-identical"""
    labels = {
        str(s): [model.atoms[i] for i in sorted(model.labels[s])]
        for s in range(model.n) if model.labels[s]
    }
    if isinstance(model, Dtmc):
        records = [
            TransitionRecord(source=s, to=t, p=p)
            for s, row in enumerate(model.rows) for t, p in row
        ]
        data = ModelFile(type="dtmc", n=model.n, init=model.init, atoms=list(model.atoms),
                         labels=labels, transitions=records)
    else:
        records = [
            TransitionRecord(source=s, action=a, to=t, p=p)
            for (s, a), row in model.transitions for t, p in row
        ]
        data = ModelFile(
            type="mdp", n=model.n, init=model.init, atoms=list(model.atoms), labels=labels,
            actions=list(model.actions), transitions=records,
            policy={str(s): a for s, a in enumerate(policy.choice)} if policy is not None else None,
        )
    return data.model_dump(by_alias=True, exclude_none=True)


def store_model(model: Union[Dtmc, Mdp], path: PathLike, policy: Optional[Policy] = None) -> None:
    _write_json(path, model_payload(model, policy))


def load_threat(path: PathLike, epsilon: Optional[float] = None) -> ThreatModel:
    data = _parse(ThreatFile, _read_json(path), path)
    try:
        return data.to_threat(epsilon)
    except (ValueError, ValidationError) as e:
        raise ParseError(str(e), path=path, field="epsilon") from None


def load_threat_template(path: PathLike) -> ThreatFile:
    return _parse(ThreatFile, _read_json(path), path)


def store_threat(tm: ThreatModel, path: PathLike) -> None:
    _write_json(path, tm.model_dump(mode="json", exclude_none=True))


def store_idtmc(export: IdtmcExport, path: PathLike) -> None:
    _write_json(path, export.model_dump(exclude_none=True))


def store_report(report: AttackReport, path: PathLike) -> None:
    _write_json(path, report.model_dump(mode="json"))


def load_report(path: PathLike) -> AttackReport:
    return _parse(AttackReport, _read_json(path), path)
