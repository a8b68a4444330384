import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { EditorSession } from "../src/session.js";
import { fixture, jsonResponse, mockService } from "./mock.js";

const gallery = fixture("gallery_n8_seed5.json");

function freshSession() {
  const svc = mockService({ "/v1/generate": () => jsonResponse(gallery) });
  const session = new EditorSession(new ApiClient("", svc.fetchImpl));
  return { session, svc };
}

describe("candidate gallery", () => {
  it("renders eight cards from the fixed-seed fixture", async () => {
    const { session } = freshSession();
    await session.generateGallery(8, { band: 0.1, seed: 5 });

    expect(session.gallery).toHaveLength(8);
    expect(session.gallery).toEqual(gallery.payload.candidates);
    for (const card of session.gallery) {
      expect(card.points).toHaveLength(257);
      expect(typeof card.smoothness).toBe("number");
      expect(Object.keys(card.parsec)).toHaveLength(11);
    }
  });

  it("repeats the same request body, and gallery, for the same seed", async () => {
    const { session, svc } = freshSession();
    await session.generateGallery(8, { band: 0.1, seed: 5 });
    const first = structuredClone(session.gallery);
    await session.generateGallery(8, { band: 0.1, seed: 5 });

    expect(svc.calls).toHaveLength(2);
    expect(svc.calls[0]!.body).toEqual(svc.calls[1]!.body);
    expect(svc.calls[0]!.body.seed).toBe(5);
    expect(svc.calls[0]!.body.n).toBe(8);
    expect(session.gallery).toEqual(first);
  });

  it("loads the clicked card into the session verbatim", async () => {
    const { session } = freshSession();
    await session.generateGallery(8, { seed: 5 });
    session.selectCandidate(3);

    expect(session.airfoil).toEqual(gallery.payload.candidates[3]);
    expect(session.achieved).toEqual(gallery.payload.candidates[3].parsec);
    expect(session.displayedPoints()).toEqual(gallery.payload.candidates[3].points);
  });

  it("shows the offline banner and disables the gallery when the service is down", async () => {
    const svc = mockService({});
    const session = new EditorSession(new ApiClient("", svc.fetchImpl));
    await session.generateGallery(8, { seed: 5 });

    expect(session.offline).toBe(true);
    expect(session.gallery).toEqual([]);
    expect(session.galleryEnabled()).toBe(false);
  });

  it("clears the offline banner on the next successful call", async () => {
    let up = false;
    const svc = mockService({
      "/v1/generate": () => {
        if (!up) throw new TypeError("connection refused");
        return jsonResponse(gallery);
      },
    });
    const session = new EditorSession(new ApiClient("", svc.fetchImpl));
    await session.generateGallery(8, { seed: 5 });
    expect(session.offline).toBe(true);

    up = true;
    await session.generateGallery(8, { seed: 5 });
    expect(session.offline).toBe(false);
    expect(session.galleryEnabled()).toBe(true);
    expect(session.gallery).toHaveLength(8);
  });

  it("treats a structured rejection as a toast, not an outage", async () => {
    const envelope = {
      request_id: "r",
      operation: "generate",
      error: { code: "invalid_request", message: "n must be at most 256" },
    };
    const svc = mockService({ "/v1/generate": () => jsonResponse(envelope, 422) });
    const session = new EditorSession(new ApiClient("", svc.fetchImpl));
    await session.generateGallery(999);

    expect(session.offline).toBe(false);
    expect(session.toast).toBe("n must be at most 256");
  });
});
