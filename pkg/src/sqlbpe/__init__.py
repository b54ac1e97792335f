"""Token-level byte-pair encoding for SQL query corpora."""
from .bpetrain import TrainReport, TrainerConfig, WorkingToken, train
from .codec import MergeRule, MergeTable, decode, encode, load_table, save_table
from .corpus import Corpus, QuerySeq, build_split, load_dataset_json, load_plaintext, vocabulary
from .sqlast import AstTree, is_tree_aligned, parse, tokenize_sql

__version__ = "0.1.0"
