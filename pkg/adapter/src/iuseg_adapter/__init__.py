from .data import ChunkRecord, Example, build_dataset, read_features, read_manifest
from .errors import AdapterError, DataError, IOFailure, UsageError
from .infer import lexical_segment, transcribe
from .model import ModelConfig, Seq2Seq
from .recipe import TrainRecipe
from .tokenizer import BOUNDARY_MARKER, Tokenizer
from .train import finetune, load_checkpoint

__version__ = "0.1.0"
