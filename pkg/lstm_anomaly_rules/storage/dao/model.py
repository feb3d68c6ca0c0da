from lstm_anomaly_rules.dto.forecaster import CHECKPOINT_FORMAT_VERSION, Checkpoint, TrainReport
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient

MODEL_ARTIFACT = "model.json"
TRAIN_REPORT_ARTIFACT = "train_report.json"


class ModelDAO:
    def __init__(self, output_dir: str, client: ArtifactClient = None):
        if not client:
            self.artifact_client: ArtifactClient = ArtifactClient(output_dir=output_dir)
        else:
            self.artifact_client = client

    def save_checkpoint(self, checkpoint: Checkpoint):
        self.artifact_client.insert_document(MODEL_ARTIFACT, checkpoint)

    def get_checkpoint(self) -> Checkpoint:
        document = self.artifact_client.get_document(MODEL_ARTIFACT)
        version = document.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise DataError(
                f"checkpoint format version {version} is not supported (expected {CHECKPOINT_FORMAT_VERSION})"
            )
        return Checkpoint(**document)

    def save_train_report(self, report: TrainReport):
        self.artifact_client.insert_document(TRAIN_REPORT_ARTIFACT, report)

    def get_train_report(self) -> TrainReport:
        return TrainReport(**self.artifact_client.get_document(TRAIN_REPORT_ARTIFACT))
