from .corpus import (Dataset, Entry, augment_hd, build_hd, format_tests, load_split, parse_tests,
                     random_program, save_split, split_even_odd, synth_generate, written_registers)
from .hd import Task, exhaustive_inputs, hd_task, hd_tasks

__all__ = [
    "Dataset", "Entry", "augment_hd", "build_hd", "format_tests", "load_split", "parse_tests",
    "random_program", "save_split", "split_even_odd", "synth_generate", "written_registers",
    "Task", "exhaustive_inputs", "hd_task", "hd_tasks",
]
