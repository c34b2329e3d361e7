#!/usr/bin/env python3
"""Model server for geoalign's real backend.

Reads one JSON request per line on stdin and answers with one JSON line on
stdout. Models are loaded on first use. Needs torch, diffusers, transformers
and torchvision; weights come from the Hugging Face cache or local paths.
"""
import argparse
import base64
import difflib
import io
import json
import sys

import numpy as np

# Library chatter must not reach the protocol stream.
PROTOCOL = sys.stdout
sys.stdout = sys.stderr

MODEL_ALIASES = {
    "stable-diffusion v1.5": "runwayml/stable-diffusion-v1-5",
    "clip-vit-large-patch14": "openai/clip-vit-large-patch14",
}


def resolve(name):
    return MODEL_ALIASES.get(name, name)


def pack_f32(array):
    return base64.b64encode(np.ascontiguousarray(array, dtype="<f4").tobytes()).decode("ascii")


def unpack_f32(text):
    return np.frombuffer(base64.b64decode(text), dtype="<f4")


def png_to_pil(text):
    from PIL import Image

    return Image.open(io.BytesIO(base64.b64decode(text))).convert("RGB")


def pil_to_png(image):
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class Clip:
    def __init__(self, name, device):
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self.torch = torch
        self.device = device
        self.id = resolve(name)
        self.model = CLIPModel.from_pretrained(self.id).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(self.id)
        self.tokenizer = self.processor.tokenizer
        self.length = self.tokenizer.model_max_length

    def info(self):
        return {"model_id": self.id, "dim": self.model.config.projection_dim, "context_length": self.length}

    def count(self, text):
        return len(self.tokenizer(text, add_special_tokens=False).input_ids)

    def encode_text(self, text):
        torch = self.torch
        ids = self.tokenizer(text, add_special_tokens=False).input_ids
        truncated = len(ids) > self.length - 2
        batch = self.tokenizer(text, padding="max_length", truncation=True, max_length=self.length,
                               return_tensors="pt").to(self.device)
        with torch.no_grad():
            out = self.model.text_model(input_ids=batch.input_ids)
            pooled = self.model.text_projection(out.pooler_output)
        seq = out.last_hidden_state[0].float().cpu().numpy()
        mask = batch.attention_mask[0].cpu().numpy().astype(int)
        tokens = self.tokenizer.convert_ids_to_tokens(batch.input_ids[0][: int(mask.sum())])
        return {
            "pooled": pack_f32(pooled[0].float().cpu().numpy()),
            "sequence": pack_f32(seq),
            "length": int(seq.shape[0]),
            "dim": int(seq.shape[1]),
            "attention_mask": mask.tolist(),
            "tokens": tokens,
            "truncated": truncated,
        }

    def encode_image(self, png):
        torch = self.torch
        inputs = self.processor(images=png_to_pil(png), return_tensors="pt").to(self.device)
        with torch.no_grad():
            v = self.model.get_image_features(**inputs)
        return {"vector": pack_f32(v[0].float().cpu().numpy())}


class AttentionControl:
    """Cross-attention control in the style of the original prompt-to-prompt
    demo: maps recorded while denoising the initial prompt are written into
    the edited pass while the schedule position lies inside each window."""

    def __init__(self):
        self.mode = "off"  # off | record | inject
        self.saved = {}
        self.use_tokens = False
        self.use_spatial = False
        self.token_mask = None
        self.token_indices = None
        self.token_weights = None


class ControlledProcessor:
    def __init__(self, name, control):
        self.name = name
        self.control = control

    def __call__(self, attn, hidden_states, encoder_hidden_states=None, attention_mask=None, **kwargs):
        import torch

        c = self.control
        cross = encoder_hidden_states is not None
        context = encoder_hidden_states if cross else hidden_states
        query = attn.head_to_batch_dim(attn.to_q(hidden_states))
        key = attn.head_to_batch_dim(attn.to_k(context))
        value = attn.head_to_batch_dim(attn.to_v(context))
        probs = attn.get_attention_scores(query, key, attention_mask)
        if c.mode == "record":
            c.saved[self.name] = probs.detach()
        elif c.mode == "inject":
            saved = c.saved.get(self.name)
            if cross:
                if c.use_tokens and saved is not None:
                    moved = torch.index_select(saved, -1, c.token_indices)
                    probs = probs * (1 - c.token_mask) + moved * c.token_mask
                if c.token_weights is not None:
                    probs = probs * c.token_weights
            elif c.use_spatial and saved is not None:
                probs = saved
        out = attn.batch_to_head_dim(torch.bmm(probs, value))
        out = attn.to_out[0](out)
        return attn.to_out[1](out)


class Diffusion:
    def __init__(self, name, device):
        import torch
        from diffusers import DDIMScheduler, StableDiffusionPipeline

        self.torch = torch
        self.device = device
        self.id = resolve(name)
        pipe = StableDiffusionPipeline.from_pretrained(self.id, safety_checker=None)
        pipe = pipe.to(device)
        self.pipe = pipe
        self.scheduler = DDIMScheduler.from_config(pipe.scheduler.config)
        self.tokenizer = pipe.tokenizer
        self.length = self.tokenizer.model_max_length
        self.control = AttentionControl()
        procs = {k: ControlledProcessor(k, self.control) for k in pipe.unet.attn_processors}
        pipe.unet.set_attn_processor(procs)

    def info(self):
        return {"model_id": self.id, "latent_factor": self.pipe.vae_scale_factor, "length": self.length,
                "dim": self.pipe.text_encoder.config.hidden_size}

    def ids(self, prompt):
        return self.tokenizer(prompt, padding="max_length", truncation=True, max_length=self.length,
                              return_tensors="pt").input_ids

    def sequence_length(self, prompt):
        n = len(self.tokenizer(prompt, add_special_tokens=False).input_ids)
        return min(n + 2, self.length)

    def embed(self, prompt):
        with self.torch.no_grad():
            return self.pipe.text_encoder(self.ids(prompt).to(self.device))[0]

    def latents(self, params):
        f = self.pipe.vae_scale_factor
        gen = self.torch.Generator("cpu").manual_seed(int(params["seed"]))
        shape = (1, self.pipe.unet.config.in_channels, params["height"] // f, params["width"] // f)
        return self.torch.randn(shape, generator=gen).to(self.device) * self.scheduler.init_noise_sigma

    def predict(self, x, t, cond, uncond, guidance, mode):
        self.control.mode = "off"
        eps_u = self.pipe.unet(x, t, encoder_hidden_states=uncond).sample
        self.control.mode = mode
        eps_c = self.pipe.unet(x, t, encoder_hidden_states=cond).sample
        self.control.mode = "off"
        return eps_u + guidance * (eps_c - eps_u)

    def sample(self, params, cond, edit=None):
        torch = self.torch
        uncond = self.embed("")
        self.scheduler.set_timesteps(int(params["steps"]))
        x = self.latents(params)
        g = float(params["guidance_scale"])
        with torch.no_grad():
            for t in self.scheduler.timesteps:
                if edit is None:
                    eps = self.predict(x, t, cond, uncond, g, "off")
                else:
                    self.predict(x, t, cond, uncond, g, "record")
                    t_scale = float(t) / self.scheduler.config.num_train_timesteps
                    self.control.use_tokens = edit["tokens_start"] <= t_scale <= edit["tokens_end"]
                    self.control.use_spatial = edit["spatial_start"] <= t_scale <= edit["spatial_end"]
                    eps = self.predict(x, t, edit["cond"], uncond, g, "inject")
                x = self.scheduler.step(eps, t, x).prev_sample
            image = self.pipe.vae.decode(x / self.pipe.vae.config.scaling_factor).sample
        self.control.saved.clear()
        image = (image / 2 + 0.5).clamp(0, 1)[0].permute(1, 2, 0).float().cpu().numpy()
        from PIL import Image

        return Image.fromarray((image * 255).round().astype("uint8"))

    def txt2img(self, params):
        return self.sample(params, self.embed(params["prompt"]))

    def from_conditioning(self, params, length, dim, rows):
        cond = self.torch.from_numpy(unpack_f32(rows).reshape(1, length, dim).copy()).to(self.device)
        return self.sample(params, cond.to(self.pipe.unet.dtype))

    def prompt_to_prompt(self, params, ca):
        torch = self.torch
        old = self.ids(params["prompt"])[0].tolist()
        new = self.ids(ca["editorial_prompt"])[0].tolist()
        mask = torch.zeros(self.length)
        indices = torch.arange(self.length)
        for tag, i0, i1, j0, j1 in difflib.SequenceMatcher(None, old, new).get_opcodes():
            if tag == "equal" or (tag == "replace" and i1 - i0 == j1 - j0):
                indices[j0:j1] = torch.arange(i0, i1)
                mask[j0:j1] = 1
        weights = None
        if ca.get("token_weights"):
            weights = torch.ones(self.length)
            for index, w in ca["token_weights"]:
                weights[int(index)] = float(w)
            weights = weights.to(self.device)
        self.control.token_mask = mask.to(self.device)
        self.control.token_indices = indices.to(self.device)
        self.control.token_weights = weights
        edit = dict(ca, cond=self.embed(ca["editorial_prompt"]))
        return self.sample(params, self.embed(params["prompt"]), edit)


class Inception:
    def __init__(self, name, device):
        import torch
        import torchvision

        self.torch = torch
        self.device = device
        self.id = name
        model = torchvision.models.inception_v3(weights="IMAGENET1K_V1", aux_logits=True)
        model.fc = torch.nn.Identity()
        self.model = model.to(device).eval()

    def info(self):
        return {"model_id": self.id, "dim": 2048, "input_size": 299}

    def features(self, png):
        torch = self.torch
        arr = np.asarray(png_to_pil(png), dtype="float32") / 255.0
        x = torch.from_numpy(arr).permute(2, 0, 1)
        mean = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
        std = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)
        with torch.no_grad():
            v = self.model(((x - mean) / std).unsqueeze(0).to(self.device))
        return {"vector": pack_f32(v[0].float().cpu().numpy())}


class ModelUnavailable(Exception):
    pass


class Server:
    def __init__(self, device):
        self.device = device
        self.models = {}

    def get(self, kind, name):
        key = (kind, name)
        if key not in self.models:
            try:
                self.models[key] = kind(name, self.device)
            except Exception as e:
                raise ModelUnavailable(f"cannot load {name!r}: {type(e).__name__}: {e}") from e
        return self.models[key]

    def handle(self, req):
        op = req["op"]
        name = req.get("model", "")
        if op == "clip_info":
            return self.get(Clip, name).info()
        if op == "encode_text":
            return self.get(Clip, name).encode_text(req["text"])
        if op == "encode_image":
            return self.get(Clip, name).encode_image(req["png"])
        if op == "count_tokens":
            return {"count": self.get(Clip, name).count(req["text"])}
        if op == "sd_info":
            return self.get(Diffusion, name).info()
        if op == "sequence_length":
            return {"length": self.get(Diffusion, name).sequence_length(req["prompt"])}
        if op == "txt2img":
            return {"png": pil_to_png(self.get(Diffusion, name).txt2img(req["params"]))}
        if op == "from_conditioning":
            d = self.get(Diffusion, name)
            return {"png": pil_to_png(d.from_conditioning(req["params"], req["length"], req["dim"],
                                                          req["conditioning"]))}
        if op == "prompt_to_prompt":
            d = self.get(Diffusion, name)
            return {"png": pil_to_png(d.prompt_to_prompt(req["params"], req["cross_attention"]))}
        if op == "inception_info":
            return self.get(Inception, name).info()
        if op == "inception_features":
            return self.get(Inception, name).features(req["png"])
        raise ValueError(f"unknown op {op!r}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args()
    server = Server(args.device)
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            reply = server.handle(json.loads(line))
            reply["ok"] = True
        except ModelUnavailable as e:
            reply = {"ok": False, "error": str(e), "code": "model_unavailable"}
        except Exception as e:  # every failure goes back to the caller
            reply = {"ok": False, "error": f"{type(e).__name__}: {e}"}
        PROTOCOL.write(json.dumps(reply) + "\n")
        PROTOCOL.flush()


if __name__ == "__main__":
    main()
