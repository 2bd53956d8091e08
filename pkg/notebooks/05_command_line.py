# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Command line workflow
#
# The `cfcnn` command drives the same library from text files: a config
# with `[layer]` sections, a dataset file and an optional tangent file.
# `cfcnn toy DIR` writes a ready-made set of all three.

# %%
import subprocess
import tempfile
from pathlib import Path

work = Path(tempfile.mkdtemp())


def run(*args):
    proc = subprocess.run(["python3", "-m", "cfcnn", *args], capture_output=True, text=True)
    print(f"$ cfcnn {' '.join(args)}  (exit {proc.returncode})")
    print(proc.stdout + proc.stderr)


run("toy", str(work))
print((work / "toy.cfg").read_text())

# %%
run("train", str(work / "toy.cfg"), "--lambda", "0.1", "--iterations", "5")
run("grad-check", str(work / "toy.cfg"))
run("adjoint-check", "--dims", "4", "--trials", "20")

# %% [markdown]
# Errors exit with status 2 and a single `error:` line.

# %%
(work / "relu.cfg").write_text((work / "toy.cfg").read_text().replace("tanh", "relu", 1))
run("train", str(work / "relu.cfg"), "--lambda", "0.1")
