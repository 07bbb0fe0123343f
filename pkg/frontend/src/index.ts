export * from "./types.js";
export * from "./backend.js";
export * from "./session.js";
export * from "./vat.js";
export * from "./validation.js";
export * from "./nsfp.js";
export * from "./invoice.js";
export * from "./audit.js";
export * from "./profile.js";
