"""Line-delimited JSON and hashing helpers shared by the stage writers."""
import hashlib
import json
import os
from typing import Dict, Iterable, Iterator, List


def dumps_record(record: Dict) -> str:
    """Serialize one record on a single line, keys in insertion order."""
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(path: str, records: Iterable[Dict]) -> int:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(dumps_record(record))
            f.write("\n")
            count += 1
    return count


def iter_jsonl(path: str) -> Iterator[tuple]:
    """Yield ``(line_number, parsed_or_raw_line)``; blank lines are skipped.

    Parsing errors are left to the caller, which knows the record schema.
    """
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            yield line_number, stripped


def write_json(path: str, payload: Dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write("\n")


def read_json(path: str) -> Dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def checksums(paths: List[str]) -> Dict[str, str]:
    return {path: sha256_file(path) for path in sorted(paths) if os.path.exists(path)}
