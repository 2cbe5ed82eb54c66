/* kvaser_usb core: shared command plumbing for Kvaser USB interfaces */

#include "kvaser_usb.h"

#define KVASER_USB_TIMEOUT 1000

int kvaser_usb_send_cmd(const struct kvaser_usb *dev, struct kvaser_cmd *cmd, int len)
{
	int actual_len;

	return usb_bulk_msg(dev->udev, dev->bulk_out, cmd, len, &actual_len,
			    KVASER_USB_TIMEOUT);
}

int kvaser_usb_send_simple_cmd(const struct kvaser_usb *dev, u8 cmd_id, int channel)
{
	struct kvaser_cmd *cmd;
	int rc;

	cmd = kmalloc(sizeof(*cmd), GFP_KERNEL);
	if (!cmd)
		return -ENOMEM;

	cmd->id = cmd_id;
	cmd->len = CMD_SIZE_ANY;
	cmd->channel = channel;

	rc = kvaser_usb_send_cmd(dev, cmd, cmd->len);

	kfree(cmd);
	return rc;
}
