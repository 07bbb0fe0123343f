/** Organization profile settings.
 *
 * The form may flag a malformed tax id inline (the rule is mirrored in
 * validation.ts), but the save always goes to the gateway and the
 * gateway's verdict is what the view reports.
 */

import type { SessionContext } from "./session.js";
import type { OrgProfile, ProfileResponse } from "./types.js";

export type ProfileOutcome =
  | { kind: "saved"; profile: OrgProfile }
  | { kind: "invalid"; reasons: string[]; message: string };

export async function saveProfile(
  session: SessionContext,
  profile: OrgProfile,
): Promise<ProfileOutcome> {
  const result = await session.request("PUT", "/api/v1/profile", {
    body: {
      display_name: profile.display_name,
      address: profile.address,
      tax_id: profile.tax_id,
      endpoint: profile.endpoint,
    },
  });
  if (result.status !== 200) {
    const body = result.body as { reasons?: string[] };
    return {
      kind: "invalid",
      reasons: body.reasons ?? [],
      message: result.error ?? "profile rejected",
    };
  }
  return { kind: "saved", profile: (result.body as ProfileResponse).profile };
}
