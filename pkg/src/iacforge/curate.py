"""Dataset curation: ingest modules, repair them into verified seed triplets,
then derive generation (with clones) and mutation records.

Every emitted record is re-scored with the reward function and must reach the
maximum; anything that cannot be verified within the repair budget is dropped
and counted.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import random
import re
import threading
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

from .errors import (
    EmptyModule,
    ExtractionError,
    InsufficientSingleModuleRepos,
    ParseError,
)
from .hcl import Configuration, canonical_hash_of, concat_module, config_stats, parse_config
from .oracles import BUILTIN, Oracles
from .policy import Policy, parse_policy, policy_from_dict
from .repair.llm import GenerationParams, LlmClient
from .repair.loop import (
    DEFAULT_MAX_TURNS,
    Outcome,
    RepairStage,
    StageCheck,
    extract_tagged,
    judge_alignment,
    run_repair_loop,
)
from .repair.templates import PROMPT_LEVELS, example_slots, render_prompt
from .reward import compute_reward
from .verify import IMPLICIT_PROVIDERS

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_ALLOWLIST = frozenset(IMPLICIT_PROVIDERS)
MAX_REWARD = 2.0

T = TypeVar("T")


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class ModuleSource:
    repo_id: str
    module_path: str
    text: str
    repo_modules: int = 1


@dataclass(frozen=True)
class SeedItem:
    repo_id: str
    module_path: str
    prompt_nl: str
    target: str
    policy: Policy
    repo_modules: int = 1
    prompt_level: str = "mid"

    def to_dict(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "module_path": self.module_path,
            "prompt_nl": self.prompt_nl,
            "target": self.target,
            "policy": self.policy.to_dict(),
            "repo_modules": self.repo_modules,
            "prompt_level": self.prompt_level,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SeedItem:
        return cls(
            d["repo_id"],
            d["module_path"],
            d["prompt_nl"],
            d["target"],
            policy_from_dict(d["policy"]),
            d.get("repo_modules", 1),
            d.get("prompt_level", "mid"),
        )


@dataclass(frozen=True)
class GenRecord:
    id: str
    prompt_nl: str
    target: str
    policy: Policy
    repo_id: str
    module_path: str
    is_clone: bool = False
    prompt_level: str = "mid"
    repo_modules: int = 1

    def to_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "kind": "gen",
            "id": self.id,
            "prompt_nl": self.prompt_nl,
            "target": self.target,
            "policy": self.policy.to_dict(),
            "repo_id": self.repo_id,
            "module_path": self.module_path,
            "is_clone": self.is_clone,
            "prompt_level": self.prompt_level,
            "repo_modules": self.repo_modules,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GenRecord:
        return cls(
            d["id"],
            d["prompt_nl"],
            d["target"],
            policy_from_dict(d["policy"]),
            d["repo_id"],
            d["module_path"],
            bool(d.get("is_clone", False)),
            d.get("prompt_level", "mid"),
            d.get("repo_modules", 1),
        )


@dataclass(frozen=True)
class MutnRecord:
    id: str
    prompt_m: str
    initial: str
    mutated: str
    policy_init: Policy
    policy_m: Policy
    repo_id: str
    module_path: str
    repo_modules: int = 1

    def to_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "kind": "mutn",
            "id": self.id,
            "prompt_m": self.prompt_m,
            "initial": self.initial,
            "mutated": self.mutated,
            "policy_init": self.policy_init.to_dict(),
            "policy_m": self.policy_m.to_dict(),
            "repo_id": self.repo_id,
            "module_path": self.module_path,
            "repo_modules": self.repo_modules,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MutnRecord:
        return cls(
            d["id"],
            d["prompt_m"],
            d["initial"],
            d["mutated"],
            policy_from_dict(d["policy_init"]),
            policy_from_dict(d["policy_m"]),
            d["repo_id"],
            d["module_path"],
            d.get("repo_modules", 1),
        )


def record_from_dict(d: dict) -> GenRecord | MutnRecord:
    if d.get("v") != SCHEMA_VERSION:
        raise ValueError(f"unsupported record schema version {d.get('v')!r}")
    return MutnRecord.from_dict(d) if d.get("kind") == "mutn" else GenRecord.from_dict(d)


def write_jsonl(path: str | Path, records: Iterable[Any]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            doc = rec.to_dict() if hasattr(rec, "to_dict") else rec
            fh.write(json.dumps(doc, sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_records(path: str | Path) -> list[GenRecord | MutnRecord]:
    return [record_from_dict(d) for d in read_jsonl(path)]


# ---------------------------------------------------------------- ingestion


def _module_dirs(repo: Path) -> list[Path]:
    found = []
    for dirpath, dirnames, filenames in os.walk(repo):
        dirnames[:] = sorted(d for d in dirnames if not d.startswith("."))
        if any(f.endswith(".tf") for f in filenames):
            found.append(Path(dirpath))
    return found


def _read_module(directory: Path) -> tuple[str | None, int]:
    files, skipped = [], 0
    for path in sorted(directory.iterdir()):
        if path.suffix != ".tf" or not path.is_file():
            continue
        try:
            files.append((path.name, path.read_text(encoding="utf-8")))
        except (OSError, UnicodeDecodeError) as exc:
            log.warning("skipping unreadable file %s: %s", path, exc)
            skipped += 1
    try:
        return concat_module(files), skipped
    except EmptyModule:
        return None, skipped


def ingest_repo(repo_id: str, repo: str | Path) -> tuple[list[ModuleSource], int]:
    repo = Path(repo)
    modules, skipped = [], 0
    entries = []
    for directory in _module_dirs(repo):
        text, bad = _read_module(directory)
        skipped += bad
        if text is not None:
            rel = directory.relative_to(repo).as_posix()
            entries.append((rel, text))
    for rel, text in entries:
        modules.append(ModuleSource(repo_id, rel, text, len(entries)))
    return modules, skipped


def ingest(tree: str | Path) -> list[ModuleSource]:
    """One entry per directory holding at least one ``.tf`` file.

    Each immediate subdirectory of ``tree`` is a repository.
    """
    tree = Path(tree)
    modules, skipped = [], 0
    for repo in sorted(p for p in tree.iterdir() if p.is_dir() and not p.name.startswith(".")):
        found, bad = ingest_repo(repo.name, repo)
        modules += found
        skipped += bad
    if skipped:
        log.warning("ingest skipped %d unreadable files", skipped)
    return modules


def ingest_manifest(manifest: str | Path) -> list[ModuleSource]:
    """Manifest is CSV with columns ``repo_id,path``; relative paths resolve against it."""
    manifest = Path(manifest)
    modules, skipped = [], 0
    with open(manifest, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#") or row[0] == "repo_id":
                continue
            repo_id, path = row[0].strip(), Path(row[1].strip())
            if not path.is_absolute():
                path = manifest.parent / path
            found, bad = ingest_repo(repo_id, path)
            modules += found
            skipped += bad
    if skipped:
        log.warning("ingest skipped %d unreadable files", skipped)
    return modules


# ---------------------------------------------------------------- filters


_LABEL_RE = re.compile(r'^\s*(provider|resource|data)\s+"([^"]+)"', re.MULTILINE)


def _prefix(type_name: str) -> str:
    return type_name.split("_", 1)[0]


def provider_names(config: Configuration | str) -> set[str]:
    """Provider block names plus resource/data type prefixes.

    Unparseable text falls back to a label scan so filtering can run before repair.
    """
    if isinstance(config, str):
        try:
            config = parse_config(config)
        except ParseError:
            names = set()
            for kind, label in _LABEL_RE.findall(config):
                names.add(label if kind == "provider" else _prefix(label))
            return names
    names = set()
    for block in config.blocks:
        if block.kind == "provider" and block.labels:
            names.add(block.labels[0])
        elif block.kind in ("resource", "data") and block.labels:
            names.add(_prefix(block.labels[0]))
    return names


def filter_providers(config: Configuration | str, allowlist: Iterable[str] = DEFAULT_ALLOWLIST) -> bool:
    """True to keep: every provider name and type prefix is allowlisted."""
    return provider_names(config) <= set(allowlist)


def dedup(items: Sequence[T], key: Callable[[T], str] | None = None) -> list[T]:
    """First occurrence per canonical hash, in input order."""
    if key is None:
        key = _canonical_key
    seen, out = set(), []
    for item in items:
        k = key(item)
        if k not in seen:
            seen.add(k)
            out.append(item)
    return out


def _canonical_key(item: Any) -> str:
    if isinstance(item, Configuration):
        return item.canonical_hash
    if isinstance(item, str):
        return canonical_hash_of(item)
    return canonical_hash_of(item.text)


# ---------------------------------------------------------------- split


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    test_size: int = 0
    """Target number of test records (taken whole repo by whole repo)."""


def split(records: Sequence[T], spec: SplitSpec) -> tuple[list[T], list[T]]:
    """Hold out records from single-module repositories only.

    Candidate repos are shuffled with the seed and taken in order while their
    records fit in the target; every other record goes to train.
    """
    by_repo: dict[str, list[T]] = defaultdict(list)
    for rec in records:
        by_repo[rec.repo_id].append(rec)
    eligible = sorted(r for r, recs in by_repo.items() if all(x.repo_modules == 1 for x in recs))
    available = sum(len(by_repo[r]) for r in eligible)
    if spec.test_size > available:
        raise InsufficientSingleModuleRepos(
            f"test target {spec.test_size} exceeds {available} records from single-module repos"
        )
    rng = random.Random(spec.seed)
    rng.shuffle(eligible)
    chosen, count = set(), 0
    for repo in eligible:
        if count >= spec.test_size:
            break
        n = len(by_repo[repo])
        if count + n <= spec.test_size:
            chosen.add(repo)
            count += n
    train = [r for r in records if r.repo_id not in chosen]
    test = [r for r in records if r.repo_id in chosen]
    return train, test


# ---------------------------------------------------------------- progress log


class ProgressLog:
    """Append-only JSON Lines checkpoint keyed by (repo_id, module_path, stage)."""

    def __init__(self, path: str | Path | None) -> None:
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str, str], dict] = {}
        if self.path and self.path.exists():
            for doc in read_jsonl(self.path):
                self._entries[(doc["repo_id"], doc["module_path"], doc["stage"])] = doc

    def get(self, repo_id: str, module_path: str, stage: str) -> dict | None:
        return self._entries.get((repo_id, module_path, stage))

    def record(self, repo_id: str, module_path: str, stage: str, status: str, payload: Any = None) -> None:
        doc = {"repo_id": repo_id, "module_path": module_path, "stage": stage, "status": status, "payload": payload}
        with self._lock:
            self._entries[(repo_id, module_path, stage)] = doc
            if self.path:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(doc, sort_keys=True, ensure_ascii=False) + "\n")
                    fh.flush()

    def dropped(self) -> list[Drop]:
        with self._lock:
            return [
                Drop(d["repo_id"], d["module_path"], d["stage"], str(d["payload"]))
                for d in self._entries.values()
                if d["status"] == "dropped"
            ]


@dataclass(frozen=True)
class Drop:
    repo_id: str
    module_path: str
    stage: str
    reason: str

    def to_dict(self) -> dict:
        return {"repo_id": self.repo_id, "module_path": self.module_path, "stage": self.stage, "reason": self.reason}


# ---------------------------------------------------------------- pipeline


class _Dropped(Exception):
    def __init__(self, stage: str, reason: str) -> None:
        super().__init__(reason)
        self.stage = stage
        self.reason = reason


@dataclass
class CurationPipeline:
    llm: LlmClient
    oracles: Oracles = BUILTIN
    max_turns: int = DEFAULT_MAX_TURNS
    progress: ProgressLog = field(default_factory=lambda: ProgressLog(None))
    allowlist: frozenset[str] = DEFAULT_ALLOWLIST
    params: GenerationParams | None = None
    workers: int = 1
    make_clones: bool = True
    drops: list[Drop] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._drop_lock = threading.Lock()
        self._examples = example_slots()

    # -- helpers

    def _drop(self, repo_id: str, module_path: str, stage: str, reason: str) -> None:
        with self._drop_lock:
            self.drops.append(Drop(repo_id, module_path, stage, reason))
        self.progress.record(repo_id, module_path, stage, "dropped", reason)

    def _map(self, fn: Callable[[Any], T], items: Sequence[Any]) -> list[T]:
        if self.workers <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, items))

    def _staged(self, item_key: tuple[str, str], stage: str, fn: Callable[[], Any]) -> Any:
        """Run ``fn`` unless the progress log already has this stage; None means dropped."""
        done = self.progress.get(*item_key, stage)
        if done is not None:
            return done["payload"] if done["status"] == "done" else None
        try:
            payload = fn()
        except _Dropped as d:
            self._drop(*item_key, d.stage, d.reason)
            return None
        self.progress.record(*item_key, stage, "done", payload)
        return payload

    def _loop(self, artifact: str, verifier, stage: RepairStage, slots: dict, **kw):
        return run_repair_loop(
            artifact, verifier, self.llm, self.max_turns, stage=stage, slots=slots, params=self.params, **kw
        )

    def _ask(self, template: str, slots: dict, tag: str) -> str:
        response = self.llm.complete(render_prompt(template, slots), self.params)
        try:
            return extract_tagged(response, tag)
        except ExtractionError:
            return ""

    def _deploy_check(self, text: str):
        return self.oracles.deploy(text)[0]

    def _policy_check(self, plan_doc) -> Callable[[str], Any]:
        def check(policy_text: str):
            return self.oracles.comply(parse_policy(policy_text), plan_doc)

        return check

    def _max_reward(self, text: str, policy: Policy) -> bool:
        return compute_reward(text, policy, self.oracles).reward == MAX_REWARD

    # -- seed stages

    def _fv1(self, mod: ModuleSource) -> str:
        tr = self._loop(mod.text, lambda a: self.oracles.compile(a)[0], RepairStage.FV1, self._examples)
        if tr.outcome not in (Outcome.REPAIRED, Outcome.PASSED_UNCHANGED):
            raise _Dropped("fv1", "validation repair exhausted")
        return tr.final_artifact

    def _fv2(self, text: str) -> str:
        tr = self._loop(text, self._deploy_check, RepairStage.FV2, self._examples)
        if tr.outcome not in (Outcome.REPAIRED, Outcome.PASSED_UNCHANGED):
            raise _Dropped("fv2", "plan repair exhausted")
        return tr.final_artifact

    def _prompt(self, text: str) -> str:
        draft = self._ask("prompt-gen", {"config": text, "level_instruction": PROMPT_LEVELS["mid"]}, "prompt")
        tr = self._loop(
            draft or "(empty prompt)",
            lambda p: judge_alignment(p, text, self.llm, self.params),
            RepairStage.PROMPT_ALIGN,
            {"config": text},
        )
        if tr.outcome not in (Outcome.REPAIRED, Outcome.PASSED_UNCHANGED):
            raise _Dropped("prompt", "prompt alignment exhausted")
        return tr.final_artifact

    def _policy(self, mod: ModuleSource, text: str, prompt: str) -> dict:
        _, plan_doc = self.oracles.deploy(text)
        draft = self._ask("policy-gen", {"prompt": prompt, "config": text}, "policy")
        tr = self._loop(
            draft or "{}", self._policy_check(plan_doc), RepairStage.FV3, {"prompt": prompt, "config": text}
        )
        if tr.outcome not in (Outcome.REPAIRED, Outcome.PASSED_UNCHANGED):
            raise _Dropped("fv3", "policy repair exhausted")
        policy = replace(parse_policy(tr.final_artifact), id=f"{mod.repo_id}/{mod.module_path}")
        return policy.to_dict()

    def seed(self, modules: Sequence[ModuleSource]) -> list[SeedItem]:
        """Provider filter, FV1 repair, dedup, FV2 repair, prompt, policy."""
        kept = []
        for mod in modules:
            key = (mod.repo_id, mod.module_path)
            if self.progress.get(*key, "filter") is None:
                if filter_providers(mod.text, self.allowlist):
                    self.progress.record(*key, "filter", "done")
                else:
                    self._drop(*key, "filter", "provider not allowlisted")
            if self.progress.get(*key, "filter")["status"] == "done":
                kept.append(mod)

        fv1 = self._map(lambda m: self._staged((m.repo_id, m.module_path), "fv1", lambda: self._fv1(m)), kept)
        survivors = [replace(m, text=t) for m, t in zip(kept, fv1) if t is not None]
        unique = dedup(survivors)
        unique_ids = {id(m) for m in unique}
        for m in survivors:
            if id(m) not in unique_ids and self.progress.get(m.repo_id, m.module_path, "dedup") is None:
                self._drop(m.repo_id, m.module_path, "dedup", "duplicate of an earlier module")

        def finish(m: ModuleSource) -> SeedItem | None:
            key = (m.repo_id, m.module_path)
            text = self._staged(key, "fv2", lambda: self._fv2(m.text))
            if text is None:
                return None
            prompt = self._staged(key, "prompt", lambda: self._prompt(text))
            if prompt is None:
                return None
            policy_doc = self._staged(key, "fv3", lambda: self._policy(m, text, prompt))
            if policy_doc is None:
                return None
            return SeedItem(m.repo_id, m.module_path, prompt, text, policy_from_dict(policy_doc), m.repo_modules)

        return [s for s in self._map(finish, unique) if s is not None]

    # -- gen

    def _clone(self, seed: SeedItem) -> str:
        target_hash = canonical_hash_of(seed.target)
        policy_json = seed.policy.to_json()

        def verify(text: str):
            fv2, plan_doc = self.oracles.deploy(text)
            if not fv2.passed:
                return fv2
            results = self.oracles.comply(seed.policy, plan_doc)
            if not results.passed:
                return results
            if canonical_hash_of(text) == target_hash:
                return StageCheck(
                    False,
                    "The configuration is identical to the original after canonicalization. "
                    "Produce a structurally different configuration.",
                )
            return StageCheck(True, "clone verified")

        draft = self._ask(
            "clone-gen", {"prompt": seed.prompt_nl, "config": seed.target, "policy": policy_json}, "cloned_terraform_config"
        )
        tr = self._loop(draft, verify, RepairStage.FV2, self._examples)
        if tr.outcome not in (Outcome.REPAIRED, Outcome.PASSED_UNCHANGED):
            raise _Dropped("clone", "clone repair exhausted")
        return tr.final_artifact

    def _gen_item(self, seed: SeedItem) -> list[dict]:
        key = (seed.repo_id, seed.module_path)
        base = f"gen:{seed.repo_id}:{seed.module_path}"
        records = []
        if self._max_reward(seed.target, seed.policy):
            records.append(
                GenRecord(base, seed.prompt_nl, seed.target, seed.policy, seed.repo_id, seed.module_path,
                          False, seed.prompt_level, seed.repo_modules).to_dict()
            )
        else:
            self._drop(*key, "gen", "target does not reach maximum reward")
            return records
        if self.make_clones:
            clone = self._staged(key, "clone", lambda: self._clone(seed))
            if clone is not None:
                if self._max_reward(clone, seed.policy):
                    records.append(
                        GenRecord(base + ":clone", seed.prompt_nl, clone, seed.policy, seed.repo_id,
                                  seed.module_path, True, seed.prompt_level, seed.repo_modules).to_dict()
                    )
                else:
                    self._drop(*key, "clone", "clone does not reach maximum reward")
        return records

    def gen(self, seeds: Sequence[SeedItem]) -> list[GenRecord]:
        out = self._map(lambda s: self._staged((s.repo_id, s.module_path), "gen", lambda: self._gen_item(s)), seeds)
        return [GenRecord.from_dict(d) for docs in out if docs for d in docs]

    # -- mutn

    def _mutation(self, seed: SeedItem) -> dict:
        init_canonical = seed.policy.canonical()

        def parts(bundle: str) -> tuple[str, str, str]:
            return (
                extract_tagged(bundle, "mutated_terraform_config"),
                extract_tagged(bundle, "mutated_policy"),
                extract_tagged(bundle, "mutation_prompt"),
            )

        def verify(bundle: str):
            config, policy_text, prompt = parts(bundle)
            fv2, plan_doc = self.oracles.deploy(config)
            if not fv2.passed:
                return fv2
            policy_m = parse_policy(policy_text)
            if policy_m.canonical() == init_canonical:
                return StageCheck(False, "The updated policy is identical to the current policy; it must reflect the change.")
            results = self.oracles.comply(policy_m, plan_doc)
            if not results.passed:
                return results
            return judge_alignment(prompt, config, self.llm, self.params)

        response = self.llm.complete(
            render_prompt(
                "mutation-gen", {"config": seed.target, "policy": seed.policy.to_json(), "prompt": seed.prompt_nl}
            ),
            self.params,
        )
        tr = self._loop(
            response,
            verify,
            RepairStage.FV2,
            {"config": seed.target, "policy": seed.policy.to_json()},
            template="repair-mutation",
            tag="corrected_mutation",
            artifact_slot="bundle",
        )
        if tr.outcome not in (Outcome.REPAIRED, Outcome.PASSED_UNCHANGED):
            raise _Dropped("mutation", "mutation repair exhausted")
        config, policy_text, prompt = parts(tr.final_artifact)
        policy_m = replace(parse_policy(policy_text), id=f"{seed.policy.id}:m")
        if not (self._max_reward(seed.target, seed.policy) and self._max_reward(config, policy_m)):
            raise _Dropped("mutation", "mutation does not reach maximum reward")
        return MutnRecord(
            f"mutn:{seed.repo_id}:{seed.module_path}", prompt, seed.target, config, seed.policy, policy_m,
            seed.repo_id, seed.module_path, seed.repo_modules,
        ).to_dict()

    def mutn(self, seeds: Sequence[SeedItem]) -> list[MutnRecord]:
        out = self._map(lambda s: self._staged((s.repo_id, s.module_path), "mutn", lambda: self._mutation(s)), seeds)
        return [MutnRecord.from_dict(d) for d in out if d]


def curate_gen(seed_items: Sequence[SeedItem], llm: LlmClient, **kw) -> list[GenRecord]:
    return CurationPipeline(llm, **kw).gen(seed_items)


def curate_mutn(seed_items: Sequence[SeedItem], llm: LlmClient, **kw) -> list[MutnRecord]:
    return CurationPipeline(llm, **kw).mutn(seed_items)


# ---------------------------------------------------------------- statistics


def lower_median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def _summary(values: list[int]) -> dict | None:
    if not values:
        return None
    return {"min": min(values), "median": lower_median(values), "max": max(values)}


def _stat_source(rec: Any) -> tuple[str, str, bool]:
    if isinstance(rec, MutnRecord):
        return rec.mutated, rec.prompt_m, True
    return rec.target, rec.prompt_nl, rec.policy is not None


def dataset_stats(splits: dict[str, Sequence[Any]]) -> dict[str, dict]:
    """Per split: min/lower-median/max of providers, resources, LOC, prompt words."""
    table = {}
    for name, records in splits.items():
        rows, with_policy = [], 0
        for rec in records:
            text, prompt, has_policy = _stat_source(rec)
            rows.append(config_stats(parse_config(text), prompt))
            with_policy += has_policy
        table[name] = {
            "n": len(rows),
            "providers": _summary([r.providers for r in rows]),
            "resources": _summary([r.resources for r in rows]),
            "loc": _summary([r.loc for r in rows]),
            "prompt_words": _summary([r.prompt_words for r in rows]),
            "pct_with_policy": 100.0 * with_policy / len(rows) if rows else None,
        }
    return table


def write_outputs(
    outdir: str | Path,
    gen_records: Sequence[GenRecord],
    mutn_records: Sequence[MutnRecord],
    spec_gen: SplitSpec,
    spec_mutn: SplitSpec,
    drops: Sequence[Drop] = (),
) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    gen_train, gen_test = split(list(gen_records), spec_gen) if gen_records else ([], [])
    mutn_train, mutn_test = split(list(mutn_records), spec_mutn) if mutn_records else ([], [])
    write_jsonl(outdir / "tfgen.train.jsonl", gen_train)
    write_jsonl(outdir / "tfgen.test.jsonl", gen_test)
    write_jsonl(outdir / "tfmutn.train.jsonl", mutn_train)
    write_jsonl(outdir / "tfmutn.test.jsonl", mutn_test)
    write_jsonl(outdir / "dropped.jsonl", drops)
    stats = dataset_stats(
        {"tfgen.train": gen_train, "tfgen.test": gen_test, "tfmutn.train": mutn_train, "tfmutn.test": mutn_test}
    )
    stats["drops"] = dict(Counter(d.stage for d in drops))
    (outdir / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return stats


def run_curation(
    modules: Sequence[ModuleSource],
    llm: LlmClient,
    outdir: str | Path,
    *,
    kind: str = "gen",
    spec: SplitSpec = SplitSpec(),
    progress_path: str | Path | None = None,
    **kw,
) -> dict:
    """Seed pipeline then gen or mutn records, split and written to ``outdir``."""
    if progress_path is None:
        Path(outdir).mkdir(parents=True, exist_ok=True)
        progress_path = Path(outdir) / "progress.jsonl"
    pipeline = CurationPipeline(llm, progress=ProgressLog(progress_path), **kw)
    seeds = pipeline.seed(modules)
    if kind == "gen":
        gen, mutn = pipeline.gen(seeds), []
    elif kind == "mutn":
        gen, mutn = [], pipeline.mutn(seeds)
    else:
        raise ValueError(f"unknown curation kind {kind!r}")
    return write_outputs(outdir, gen, mutn, spec, spec, pipeline.progress.dropped())
