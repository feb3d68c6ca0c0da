import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from typing import Any, List, Optional

import pandas as pd
from pydantic import BaseModel

from lstm_anomaly_rules.errors import DataError

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "ANOMALY_RULES_OUTPUT_ROOT"


class ArtifactClient:
    """
    Reads and writes the named artifacts of one output directory.

    Writes made inside ``execute_write_transaction`` land in a staging directory next to the
    output directory and are moved into place only when the block finishes without error.
    Reads see staged artifacts first.
    """

    def __init__(self, output_dir: str, root: Optional[str] = None):
        if root is None:
            root = os.getenv(OUTPUT_ROOT_ENV, "")
        if root and not os.path.isabs(output_dir):
            output_dir = os.path.join(root, output_dir)
        self.output_dir = os.path.abspath(output_dir)
        self.staging_dir: Optional[str] = None

    def path_for(self, name: str) -> str:
        return os.path.join(self.staging_dir or self.output_dir, name)

    def locate(self, name: str) -> Optional[str]:
        for directory in (self.staging_dir, self.output_dir):
            if directory and os.path.isfile(os.path.join(directory, name)):
                return os.path.join(directory, name)
        return None

    def exists(self, name: str) -> bool:
        return self.locate(name) is not None

    def _require(self, name: str) -> str:
        path = self.locate(name)
        if path is None:
            raise DataError(f"artifact {name!r} not found in {self.output_dir}; run the producing stage first")
        return path

    def _write_target(self, name: str) -> str:
        if self.staging_dir is None:
            os.makedirs(self.output_dir, exist_ok=True)
        return self.path_for(name)

    @contextmanager
    def execute_write_transaction(self):
        if self.staging_dir is not None:
            # already inside a transaction
            yield self
            return

        parent = os.path.dirname(self.output_dir)
        os.makedirs(parent, exist_ok=True)
        self.staging_dir = tempfile.mkdtemp(prefix=".staging-", dir=parent)
        try:
            yield self
            staged = sorted(os.listdir(self.staging_dir))
            os.makedirs(self.output_dir, exist_ok=True)
            for name in staged:
                os.replace(os.path.join(self.staging_dir, name), os.path.join(self.output_dir, name))
            logger.info("published %d artifacts to %s", len(staged), self.output_dir)
        finally:
            shutil.rmtree(self.staging_dir, ignore_errors=True)
            self.staging_dir = None

    def insert_document(self, name: str, document: BaseModel):
        with open(self._write_target(name), "w") as f:
            f.write(document.model_dump_json(indent=2))
            f.write("\n")

    def insert_documents(self, name: str, documents: List[BaseModel]):
        payload = [document.model_dump(mode="json") for document in documents]
        with open(self._write_target(name), "w") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")

    def get_document(self, name: str) -> Any:
        with open(self._require(name)) as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise DataError(f"artifact {name!r} is not valid JSON: {e}")

    def insert_table(self, name: str, frame: pd.DataFrame):
        frame.to_csv(self._write_target(name), index=False)

    def get_table(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self._require(name), float_precision="round_trip")

    def insert_text(self, name: str, text: str):
        with open(self._write_target(name), "w") as f:
            f.write(text)
