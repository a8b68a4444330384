export * from "./types.js";
export * from "./api.js";
export * from "./session.js";
export * from "./canvas.js";
