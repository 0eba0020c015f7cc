import { describe, expect, it } from "vitest";

import type { FinalizeResponse, PromptResponse } from "../src/api.js";
import {
  applyFinalizeResponse,
  applyPromptResponse,
  canFinalize,
  canSubmitPrompt,
  initialViewModel,
  withError,
  withPending,
  withSession,
} from "../src/state.js";

const latency = { predict_s: 0, generate_s: 0.1, transmit_s: 0, total_s: 0.1 };

function promptResponse(round: number, strength: number | null): PromptResponse {
  return {
    session_id: "s",
    round_index: round,
    phase: "preview_ready",
    image: `d${round}`,
    image_url: `/images/d${round}`,
    predicted_strength: strength,
    steps: 25,
    latency,
  };
}

describe("phase gating mirrors the server state machine", () => {
  it("blocks everything before a session exists", () => {
    const vm = initialViewModel();
    expect(canSubmitPrompt(vm)).toBe(false);
    expect(canFinalize(vm)).toBe(false);
  });

  it("created: prompt allowed, finalize blocked", () => {
    const vm = withSession(initialViewModel(), "s");
    expect(canSubmitPrompt(vm)).toBe(true);
    expect(canFinalize(vm)).toBe(false);
  });

  it("preview_ready: both allowed", () => {
    let vm = withSession(initialViewModel(), "s");
    vm = applyPromptResponse(vm, "a fox", promptResponse(1, null));
    expect(vm.phase).toBe("preview_ready");
    expect(canSubmitPrompt(vm)).toBe(true);
    expect(canFinalize(vm)).toBe(true);
  });

  it("pending blocks duplicate submissions", () => {
    let vm = withSession(initialViewModel(), "s");
    vm = applyPromptResponse(vm, "a fox", promptResponse(1, null));
    vm = withPending(vm, true);
    expect(canSubmitPrompt(vm)).toBe(false);
    expect(canFinalize(vm)).toBe(false);
  });

  it("refined: terminal for prompts and finalize", () => {
    let vm = withSession(initialViewModel(), "s");
    vm = applyPromptResponse(vm, "a fox", promptResponse(1, null));
    const final: FinalizeResponse = {
      session_id: "s",
      phase: "refined",
      image: "dc",
      image_url: "/images/dc",
      strength_used: 0.62,
      steps: 16,
      latency: { ...latency, transmit_s: 0.2, total_s: 0.3 },
    };
    vm = applyFinalizeResponse(vm, final);
    expect(vm.phase).toBe("refined");
    expect(canSubmitPrompt(vm)).toBe(false);
    expect(canFinalize(vm)).toBe(false);
    expect(vm.rounds[vm.rounds.length - 1].tier).toBe("cloud");
  });
});

describe("timeline bookkeeping", () => {
  it("keeps rounds in server round_index order regardless of arrival", () => {
    let vm = withSession(initialViewModel(), "s");
    vm = applyPromptResponse(vm, "two", promptResponse(2, 0.55));
    vm = applyPromptResponse(vm, "one", promptResponse(1, null));
    expect(vm.rounds.map((r) => r.roundIndex)).toEqual([1, 2]);
  });

  it("strength badge values stay within the clip range", () => {
    let vm = withSession(initialViewModel(), "s");
    vm = applyPromptResponse(vm, "one", promptResponse(1, null));
    vm = applyPromptResponse(vm, "two", promptResponse(2, 0.9));
    const withStrength = vm.rounds.filter((r) => r.strength !== null);
    expect(withStrength.every((r) => r.strength! >= 0.4 && r.strength! <= 0.9)).toBe(true);
  });

  it("errors clear pending but keep rounds", () => {
    let vm = withSession(initialViewModel(), "s");
    vm = applyPromptResponse(vm, "one", promptResponse(1, null));
    vm = withPending(vm, true);
    vm = withError(vm, "backend unavailable");
    expect(vm.pending).toBe(false);
    expect(vm.error).toBe("backend unavailable");
    expect(vm.rounds).toHaveLength(1);
  });
});
