from .autoencoder import (
    PAPER_AE_GRID,
    AeArchitecture,
    AeTrainConfig,
    FrameAutoencoder,
    decode,
    encode_frames,
    load_autoencoder,
    save_autoencoder,
    train_autoencoder,
)
from .frames import collect_last_stacks, read_frame_dataset, write_frame_dataset
from .representation import (
    TaskRepresentation,
    build_representation,
    cosine_similarity,
    min_max_scale,
    sample_frame_stack,
)
from .text import (
    TASK_DESCRIPTIONS,
    TRACK_TASKS,
    TextEncoderConfig,
    description_for_track,
    embed_text,
    load_text_overrides,
    save_text_overrides,
)

__all__ = [
    "PAPER_AE_GRID", "AeArchitecture", "AeTrainConfig", "FrameAutoencoder", "decode",
    "encode_frames", "load_autoencoder", "save_autoencoder", "train_autoencoder",
    "collect_last_stacks", "read_frame_dataset", "write_frame_dataset", "TaskRepresentation",
    "build_representation", "cosine_similarity", "min_max_scale", "sample_frame_stack",
    "TASK_DESCRIPTIONS", "TRACK_TASKS", "TextEncoderConfig", "description_for_track", "embed_text",
    "load_text_overrides", "save_text_overrides",
]
