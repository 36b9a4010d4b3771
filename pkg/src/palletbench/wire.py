"""NDJSON wire protocol for external policies.

The harness launches the policy as a subprocess and exchanges one JSON
object per line over stdin/stdout:

  handshake  ->  {"type": "handshake", "protocol_version": "1"}
  handshake  <-  {"type": "handshake", "protocol_version": "1",
                  "policy_name": str, "reentrant": bool}
  step       ->  {"type": "step", "episode_id": int, "step": int,
                  "goal_text": str, "point_count": int,
                  "cloud_ref": path-to-binary-cloud}
  response   <-  {"type": "action", "pick_mask_rle": [...],
                  "target_mask_rle": [...], "done_probability": float}
             or  {"type": "query_outputs", "pick_confidence": [...],
                  "put_confidence": [...], "pick_embeddings": [[...]],
                  "put_embeddings": [[...]], "masks_rle": [[...]],
                  "done_probability": float}

Query-output responses are decoded through the pair-selection module.  Any
malformed message raises ProtocolError, which the CLI maps to exit code 2.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from pathlib import Path

from .encoding import rle_to_mask
from .errors import ProtocolError
from .pairselect import masks_from_outputs, query_outputs_from_wire
from .perception import ActionMaskPair

PROTOCOL_VERSION = "1"


class ExternalPolicy:
    """Adapter that fulfills the Policy interface over the wire protocol."""

    privileged = False

    def __init__(self, command: str, cloud_dir: str | None = None):
        self.command = command
        self.name = f"external:{command}"
        self.reentrant = False
        self._proc: subprocess.Popen | None = None
        self._cloud_dir = Path(cloud_dir) if cloud_dir else Path(tempfile.mkdtemp(prefix="palletbench-wire-"))

    def _ensure_started(self) -> None:
        if self._proc is not None:
            return
        self._proc = subprocess.Popen(
            shlex.split(self.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._send({"type": "handshake", "protocol_version": PROTOCOL_VERSION})
        reply = self._recv()
        if reply.get("type") != "handshake" or reply.get("protocol_version") != PROTOCOL_VERSION:
            raise ProtocolError(f"bad handshake: {reply!r}")
        self.name = f"external:{reply.get('policy_name', self.command)}"
        self.reentrant = bool(reply.get("reentrant", False))

    def _send(self, obj: dict) -> None:
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(obj) + "\n")
            self._proc.stdin.flush()
        except BrokenPipeError as e:
            raise ProtocolError("policy process closed its stdin") from e

    def _recv(self) -> dict:
        assert self._proc is not None and self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if not line:
            raise ProtocolError("policy process closed its stdout")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"malformed JSON from policy: {line!r}") from e
        if not isinstance(obj, dict):
            raise ProtocolError("policy message must be a JSON object")
        return obj

    def begin_episode(self, episode_id: int) -> None:
        self._ensure_started()

    def act(self, obs) -> ActionMaskPair:
        self._ensure_started()
        cloud_path = self._cloud_dir / f"ep{obs.episode_id:05d}-step{obs.step:03d}.bin"
        cloud_path.write_bytes(obs.cloud.to_bytes())
        n = len(obs.cloud)
        self._send(
            {
                "type": "step",
                "episode_id": obs.episode_id,
                "step": obs.step,
                "goal_text": obs.goal_text,
                "point_count": n,
                "cloud_ref": str(cloud_path),
            }
        )
        reply = self._recv()
        cloud_path.unlink(missing_ok=True)
        kind = reply.get("type")
        try:
            if kind == "action":
                return ActionMaskPair(
                    pick_mask=rle_to_mask(reply["pick_mask_rle"], n),
                    target_mask=rle_to_mask(reply["target_mask_rle"], n),
                    done_probability=float(reply["done_probability"]),
                )
            if kind == "query_outputs":
                outputs = query_outputs_from_wire(reply, n_points=n)
                return masks_from_outputs(outputs)
        except ProtocolError:
            raise
        except Exception as e:
            raise ProtocolError(f"bad policy response fields: {e}") from e
        raise ProtocolError(f"unknown policy response type {kind!r}")

    def describe(self) -> dict:
        return {"name": self.name, "privileged": self.privileged}

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except Exception:
            self._proc.kill()
        self._proc = None
