"""
/api/v1/presets: named system preset management
"""

from __future__ import annotations
from fastapi import APIRouter, HTTPException
from ..models import PresetsResponse, PresetEntry, PresetCreateRequest

presets_router = APIRouter(prefix="/presets", tags=["Presets"])


def _pm():
    from core.presets import PresetManager
    return PresetManager()


@presets_router.get("", response_model=PresetsResponse, summary="List all system presets")
def list_presets():
    pm = _pm()
    return PresetsResponse(presets=[PresetEntry(name=n, builtin=pm.is_builtin(n), system=s)
                                    for n, s in pm.presets.items()])


@presets_router.get("/{name}", response_model=PresetEntry, summary="Get one preset")
def get_preset(name: str):
    pm = _pm()
    try:
        return PresetEntry(name=name, builtin=pm.is_builtin(name), system=pm.get_preset(name))
    except KeyError:
        raise HTTPException(404, f"Preset not found: {name}")


@presets_router.post("", response_model=PresetEntry, status_code=201, summary="Create or update a preset")
def create_preset(req: PresetCreateRequest):
    pm = _pm()
    pm.save_preset(req.name, req.system.as_mapping())
    return PresetEntry(name=req.name, builtin=False, system=pm.get_preset(req.name))


@presets_router.delete("/{name}", status_code=204, summary="Delete a user preset")
def delete_preset(name: str):
    pm = _pm()
    if name not in pm.presets:
        raise HTTPException(404, f"Preset not found: {name}")
    if not pm.delete_preset(name):
        raise HTTPException(409, f"Built-in presets cannot be deleted: {name}")
