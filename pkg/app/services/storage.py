"""Leitura e escrita dos formatos de arquivo da CLI.
- Cadeias e checkpoints em JSON, conjuntos de dados no formato de linhas
`rotulo,s_1 s_2 ... s_T` e tabelas em CSV com cabeçalho.
- Números reais são gravados com 17 dígitos significativos; a saída é
determinística byte a byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import structlog

from app.cli.schemas import ChainDocument, CheckpointDocument, validate_document
from common.errors import ChainValidationError, DataFormatError, UsageError
from tclambda.markov import Dataset, MarkovChain, Trajectory, validate_chain
from tclambda.trainer import TabularClassifier


logger = structlog.get_logger("storage")


def read_json(path: Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise UsageError(f"Arquivo nao encontrado: {path}", details={"path": str(path)}) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(
            f"{path}: JSON invalido ({exc.msg})", details={"path": str(path), "line": exc.lineno}
        ) from exc


def write_json(path: Path, payload: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def load_chain(path: Path) -> MarkovChain:
    """Lê um arquivo de cadeia e valida as invariantes; violações levantam ChainValidationError."""
    doc = validate_document(ChainDocument, read_json(path), str(path))
    chain = doc.to_chain()
    report = validate_chain(chain)
    if not report.ok:
        violations = [v.to_dict() for v in report.violations]
        logger.warning("chain_invalid", path=str(path), violations=len(violations))
        raise ChainValidationError(violations)
    return chain


def save_chain(chain: MarkovChain, path: Path) -> None:
    write_json(path, ChainDocument.from_chain(chain).model_dump())


def _parse_line(line: str, lineno: int) -> Trajectory:
    label_text, sep, states_text = line.partition(",")
    try:
        if not sep:
            raise ValueError("separador ',' ausente")
        label = int(label_text)
        states = tuple(int(s) for s in states_text.split())
    except ValueError as exc:
        raise DataFormatError(f"Linha {lineno} mal formada: {exc}", details={"line": lineno}) from exc
    if not states:
        raise DataFormatError(f"Linha {lineno} sem estados", details={"line": lineno})
    if label < 1 or min(states) < 1:
        raise DataFormatError(f"Linha {lineno}: indices devem ser >= 1", details={"line": lineno})
    return Trajectory(states, label)


def load_dataset(path: Path, M: int | None = None, K: int | None = None) -> Dataset:
    """Lê um conjunto de dados; M e K ausentes são inferidos dos maiores índices do arquivo."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as exc:
        raise UsageError(f"Arquivo nao encontrado: {path}", details={"path": str(path)}) from exc
    trajectories = [_parse_line(line, n) for n, line in enumerate(lines, start=1) if line.strip()]
    if not trajectories:
        raise DataFormatError(f"{path}: conjunto de dados vazio")
    M = max(max(t.states) for t in trajectories) if M is None else M
    K = max(t.label for t in trajectories) if K is None else K
    return Dataset(tuple(trajectories), M, K)


def save_dataset(data: Dataset, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{t.label}," + " ".join(str(s) for s in t.states) for t in data]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_cell(v) for v in row] for row in rows)


def save_checkpoint(model: TabularClassifier, path: Path, train: dict[str, Any] | None = None) -> None:
    write_json(path, CheckpointDocument.from_model(model, train).model_dump(exclude_none=True))


def load_checkpoint(path: Path) -> TabularClassifier:
    return validate_document(CheckpointDocument, read_json(path), str(path)).to_model()
