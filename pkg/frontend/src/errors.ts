/** Typed errors crossing the bridge boundary: a code plus the message text
 * reported by the core toolkit. Calls never abort the process. */

export type BridgeErrorCode = "validation" | "numerical" | "io" | "internal";

export class BridgeError extends Error {
  readonly code: BridgeErrorCode;

  constructor(code: BridgeErrorCode, message: string) {
    super(message);
    this.name = "BridgeError";
    this.code = code;
  }
}

export function validationError(message: string): BridgeError {
  return new BridgeError("validation", message);
}
